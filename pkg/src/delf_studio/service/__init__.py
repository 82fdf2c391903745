"""Front ends over the session engine: config, CLI, HTTP API, replay, reports."""
