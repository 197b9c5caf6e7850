/**
 * Intake form model and validation.
 *
 * Mirrors the server-side intake record: a mode selection plus the
 * structured fields each mode requires. Submission is allowed only when
 * every required field for the chosen mode is valid.
 */

export type IntakeMode = "emergency" | "consultation";

export const ABCDE_ITEMS = [
  "airway",
  "breathing",
  "circulation",
  "disability",
  "exposure",
] as const;

export interface IntakeFormModel {
  mode: IntakeMode;
  mechanismText: string;
  mechanismCategory: string;
  burnSite: string;
  suspectedDepth: string;
  circumferential: boolean;
  weightKg: number | null;
  ageYears: number | null;
  abcde: Record<string, string>;
  secondaryFindings: string;
  historyNotes: string;
}

export function emptyIntakeForm(mode: IntakeMode = "consultation"): IntakeFormModel {
  return {
    mode,
    mechanismText: "",
    mechanismCategory: "",
    burnSite: "",
    suspectedDepth: "",
    circumferential: false,
    weightKg: null,
    ageYears: null,
    abcde: {},
    secondaryFindings: "",
    historyNotes: "",
  };
}

export interface FieldError {
  field: string;
  message: string;
}

const COMMON_REQUIRED: Array<keyof IntakeFormModel> = [
  "mechanismText",
  "mechanismCategory",
  "burnSite",
];

/** Fields every mode requires, plus the emergency-only additions. */
export function requiredFields(mode: IntakeMode): string[] {
  const fields = COMMON_REQUIRED.map(String);
  if (mode === "emergency") {
    fields.push("weightKg", "ageYears");
    for (const item of ABCDE_ITEMS) fields.push(`abcde.${item}`);
  }
  return fields;
}

/** Errors name each missing or invalid required field for the chosen mode. */
export function validateIntake(form: IntakeFormModel): FieldError[] {
  const errors: FieldError[] = [];
  for (const field of COMMON_REQUIRED) {
    const value = form[field];
    if (typeof value === "string" && value.trim() === "") {
      errors.push({ field, message: `${field} is required` });
    }
  }
  if (form.mode === "emergency") {
    if (form.weightKg === null) {
      errors.push({ field: "weightKg", message: "weightKg is required in emergency mode" });
    }
    if (form.ageYears === null) {
      errors.push({ field: "ageYears", message: "ageYears is required in emergency mode" });
    }
    for (const item of ABCDE_ITEMS) {
      const entry = form.abcde[item];
      if (!entry || entry.trim() === "") {
        errors.push({
          field: `abcde.${item}`,
          message: `primary survey item ${item} is required in emergency mode`,
        });
      }
    }
  }
  if (form.weightKg !== null && !(form.weightKg > 0 && form.weightKg <= 400)) {
    errors.push({ field: "weightKg", message: "weightKg must be in (0, 400]" });
  }
  if (form.ageYears !== null && !(form.ageYears >= 0 && form.ageYears <= 130)) {
    errors.push({ field: "ageYears", message: "ageYears must be in [0, 130]" });
  }
  return errors;
}

export function submitEnabled(form: IntakeFormModel): boolean {
  return validateIntake(form).length === 0;
}

/** Fraction of required fields already filled, for the progress indicator. */
export function completion(form: IntakeFormModel): number {
  const required = requiredFields(form.mode);
  if (required.length === 0) return 1;
  const invalid = new Set(validateIntake(form).map((e) => e.field));
  const missing = required.filter((f) => invalid.has(f)).length;
  return (required.length - missing) / required.length;
}

/** Wire format expected by POST /patients/{id}/sessions. */
export function toApiPayload(form: IntakeFormModel): Record<string, unknown> {
  return {
    mode: form.mode,
    mechanism_text: form.mechanismText,
    mechanism_category: form.mechanismCategory || "unspecified",
    burn_site: form.burnSite,
    suspected_depth: form.suspectedDepth,
    circumferential: form.circumferential,
    weight_kg: form.weightKg,
    age_years: form.ageYears,
    abcde: form.abcde,
    secondary_findings: form.secondaryFindings,
    history: form.historyNotes ? { notes: form.historyNotes } : {},
  };
}
