"""Handler modules for FV2ES."""

from src.handlers.command_handler import CommandHandler

__all__ = ['CommandHandler']
