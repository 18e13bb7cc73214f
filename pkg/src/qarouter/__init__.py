"""Question router: classify a question, answer it via retrieval+reading or via text-to-SQL."""

__version__ = "0.1.0"
