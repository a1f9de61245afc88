"""CLI, report emission, and the external-model wire protocol."""
