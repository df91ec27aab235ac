"""Routes package for the E-TRoll Flask application."""
