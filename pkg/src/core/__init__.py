# Model assembly, validation, LP files and CLI
