"""scmfem package."""
