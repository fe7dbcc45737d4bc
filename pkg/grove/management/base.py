"""
Shared base for the grove management commands.

Usage errors (unknown option, bad choice, non-integer value) end with exit
status 1 like configuration errors, instead of argparse's status 2, which
the commands reserve for data errors.
"""

import sys

from django.core.management.base import BaseCommand, CommandError, CommandParser

USAGE_EXIT_CODE = 1


class UsageErrorParser(CommandParser):
    def error(self, message):
        if self.called_from_command_line:
            self.print_usage(sys.stderr)
            self.exit(USAGE_EXIT_CODE, f'{self.prog}: error: {message}\n')
        raise CommandError(f'Error: {message}', returncode=USAGE_EXIT_CODE)


class GroveCommand(BaseCommand):
    """BaseCommand whose argument parser reports usage errors with exit status 1"""

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.__class__ = UsageErrorParser
        return parser
