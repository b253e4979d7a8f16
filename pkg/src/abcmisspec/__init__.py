"""Accept/reject ABC with model-misspecification diagnostics."""

__version__ = "0.1.0"
