"""
Command Registry System for the ANEPFC toolkit
Subcommands are registered with their metadata; the argument parser is generated from the registry
"""

import argparse


class Command:
    """Represents a subcommand with its metadata and argument declarations"""
    def __init__(self, name, handler, usage="", aliases=None, configure=None):
        self.name = name
        self.handler = handler
        self.usage = usage
        self.aliases = aliases or []
        self.configure = configure  # callable adding the subcommand's arguments to its parser


class CommandRegistry:
    """Registry for all available subcommands"""
    def __init__(self):
        self.commands = {}
        self.aliases = {}

    def register(self, command):
        """Register a command and its aliases"""
        if command.name in self.commands or command.name in self.aliases:
            raise ValueError(f"command {command.name} is already registered")
        self.commands[command.name] = command
        for alias in command.aliases:
            self.aliases[alias] = command.name

    def get_command(self, name):
        """Get command by name or alias"""
        if name in self.commands:
            return self.commands[name]
        if name in self.aliases:
            return self.commands[self.aliases[name]]
        return None

    def get_all_commands(self):
        return self.commands.copy()

    def build_parser(self, prog, description="", add_global_arguments=None):
        """argparse parser with one subparser per registered command, in registration order"""
        parser = argparse.ArgumentParser(prog=prog, description=description)
        if add_global_arguments:
            add_global_arguments(parser)
        subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
        subparsers.required = True
        for command in self.commands.values():
            sub = subparsers.add_parser(command.name, aliases=command.aliases, help=command.usage,
                                        description=command.usage)
            if command.configure:
                command.configure(sub)
            sub.set_defaults(command_name=command.name)
        return parser
