"""HTTP service exposing the reconstruction library."""
