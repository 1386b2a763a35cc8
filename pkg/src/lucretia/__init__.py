"""Parser, small-step interpreter and Hoare-style checker for the Lucretia core calculus."""
from importlib import resources

from .checker import Judgment, alpha_equivalent, check_program
from .diagnostics import CheckError, Diagnostic, LucretiaError, ParseError, SourceSpan
from .interpreter import Halt, Heap, RuntimeFault, run, step, trace
from .parser import parse_contract, parse_program

__all__ = [
    "CheckError",
    "Diagnostic",
    "Halt",
    "Heap",
    "Judgment",
    "LucretiaError",
    "ParseError",
    "RuntimeFault",
    "SourceSpan",
    "alpha_equivalent",
    "check_program",
    "parse_contract",
    "parse_program",
    "program_path",
    "run",
    "step",
    "trace",
]


def program_path(name: str):
    """Path of a bundled .luc program, e.g. program_path("init_app")."""
    return resources.files(__name__) / "programs" / f"{name}.luc"
