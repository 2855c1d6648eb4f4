"""
FV2ES - multimodal video-to-emotion inference, reparameterization and toy training.
Entry point for the application.
"""

from src.config import args, logger, parser, _
from src.handlers.command_handler import CommandHandler

if __name__ == "__main__":
    if not args.command:
        parser.print_help()
        exit(2)
    try:
        exit(CommandHandler(args).handle())
    except KeyboardInterrupt:
        logger.info(_("Exiting..."))
        exit(130)
