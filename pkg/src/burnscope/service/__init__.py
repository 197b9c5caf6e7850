"""HTTP JSON service and asynchronous analysis jobs."""

from .jobs import AnalysisJob, JobRunner

__all__ = ["AnalysisJob", "JobRunner"]
