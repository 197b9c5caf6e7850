"""Multi-view 3D burn assessment: reconstruction, wound metrics, healing tracking."""

__version__ = "0.1.0"
