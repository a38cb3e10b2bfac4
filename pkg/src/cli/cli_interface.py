"""
Command-line interface for the derived brackets toolkit
Loads algebra bundles, dispatches commands and prints deterministic JSON reports
"""

import argparse
import logging
import sys
import time
from typing import Any, Dict, List, Optional, Tuple

import psutil

from ..core.bundle import AlgebraBundle, load_bundle
from ..core.config import load_config, resolve_arity, resolve_max_failures, resolve_workers
from ..core.error_handler import (BracketsIOError, DerivedBracketsError, ErrorSeverity, PreconditionError,
                                  error_handler)
from ..core.fixtures import FIXTURES, get_fixture
from ..core.models import Report, Suite
from ..core.scalars import bernoulli_first
from ..core.suites import (Subject, brackets_report, cocone_report, fiber_model_report, koszul_report,
                           mis_signed_bernoulli, run_suite, transfer_check, validate_report)
from ..core.verification import VerificationManager
from ..utils.logger import setup_logger

logger = logging.getLogger(__name__)


class CLIInterface:
    """Command-line interface for computing and checking higher derived brackets"""

    def __init__(self, configure_logging: bool = True):
        self.configure_logging = configure_logging
        self.config: Dict[str, Any] = {}
        self.manager = VerificationManager()

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Run one command and return the process exit code (0 iff the report is ok)"""
        parser = self._create_parser()
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1

        self.config = load_config(args.config)
        self._setup_logging(args)
        output = self.config["output"]
        output_format = args.format or output.get("format", "json")

        try:
            self.manager = VerificationManager(indent=output.get("indent", 2),
                                               include_timing=output.get("include_timing", False),
                                               max_failures=resolve_max_failures(self.config))
            start = time.perf_counter()
            report = self._dispatch(args)
            report.timing_ms = (time.perf_counter() - start) * 1000.0
            memory = psutil.Process().memory_info().rss / (1024 * 1024)
            logger.info(f"{args.command}: {report.total_checks} checks in {report.timing_ms:.1f} ms, "
                        f"ok={report.ok}, rss {memory:.1f} MiB")
            logger.debug(f"Report digest: {self.manager.digest(report)}")
            self._emit(report, output_format, args.output)
            return 0 if report.ok else 1
        except KeyboardInterrupt:
            print("\nOperation cancelled by user", file=sys.stderr)
            return 1
        except DerivedBracketsError as e:
            info = error_handler.handle_error(e, {"command": args.command})
        except Exception as e:
            info = error_handler.handle_error(e, {"command": args.command}, severity=ErrorSeverity.CRITICAL)
        return self._emit_error(args.command, info.to_diagnostic(verbose=args.verbose), output_format, args.output)

    def _create_parser(self) -> argparse.ArgumentParser:
        """Create command-line argument parser"""
        parser = argparse.ArgumentParser(
            prog="derived-brackets",
            description="Higher derived brackets of graded Lie algebras with a splitting",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog="""
Examples:
  %(prog)s validate algebra.json                 # Check every axiom of a bundle
  %(prog)s brackets algebra.json --source D      # Higher brackets of a derivation
  %(prog)s check --suite all --seed 7            # Every suite on shipped and random fixtures
  %(prog)s transfer-check --fixture sl2-split    # Closed forms against homotopy transfer
  %(prog)s cocone algebra.json --arity 3         # Mapping cocone structure and its checks
            """
        )

        # Global options
        parser.add_argument('-v', '--verbose', action='store_true',
                            help='Enable verbose output')
        parser.add_argument('-q', '--quiet', action='store_true',
                            help='Suppress non-error output')
        parser.add_argument('--config', default=None,
                            help='Configuration file (default: brackets_config.json)')

        # Options shared by every command
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument('bundle', nargs='?', default=None,
                            help='Algebra bundle (JSON)')
        common.add_argument('--fixture', choices=sorted(FIXTURES),
                            help='Use a built-in fixture instead of a bundle')
        common.add_argument('--arity', type=int, default=None,
                            help='Truncation arity (default: bundle max_arity, then config)')
        common.add_argument('--format', choices=['json', 'text'], default=None,
                            help='Output format (default: json)')
        common.add_argument('--output', '-o', default=None,
                            help='Write the report to this path instead of stdout')

        subparsers = parser.add_subparsers(dest='command', help='Available commands')

        subparsers.add_parser('validate', parents=[common], help='Check the axioms of a bundle')

        brackets_parser = subparsers.add_parser('brackets', parents=[common],
                                                help='Compute the higher brackets of one source')
        brackets_parser.add_argument('--source', required=True,
                                     help='Derivation, element or basis name ("d" for the differential)')
        brackets_parser.add_argument('--via-transfer', action='store_true',
                                     help='Use homotopy transfer; works when A is not a subalgebra')

        check_parser = subparsers.add_parser('check', parents=[common],
                                             help='Run the identity suites')
        check_parser.add_argument('--suite', choices=[s.value for s in Suite], default=Suite.ALL.value,
                                  help='Suite to run (default: all)')
        check_parser.add_argument('--seed', type=int, default=None,
                                  help='Add seeded randomized fixtures')

        transfer_parser = subparsers.add_parser('transfer-check', parents=[common],
                                                help='Compare closed forms with the transferred structure')
        transfer_parser.add_argument('--fault-bernoulli', action='store_true', help=argparse.SUPPRESS)

        cocone_parser = subparsers.add_parser('cocone', parents=[common],
                                              help='Mapping cocone model and its checks')
        cocone_parser.add_argument('--with-second-algebra', action='store_true',
                                   help='Use the bundle second_algebra as N')
        cocone_parser.add_argument('--with-cylinder-oracle', action='store_true',
                                   help='Also transfer from polynomial forms (slow)')

        fiber_parser = subparsers.add_parser('fiber-model', parents=[common],
                                             help='Small model of the homotopy fiber of the inclusion')
        fiber_parser.add_argument('--with-second-algebra', action='store_true',
                                  help='Use the bundle second_algebra as N')

        return parser

    def _setup_logging(self, args):
        logging_config = self.config["logging"]
        level = getattr(logging, str(logging_config.get("level", "INFO")).upper(), logging.INFO)
        if args.verbose:
            level = logging.DEBUG
        elif args.quiet:
            level = logging.WARNING
        if self.configure_logging:
            setup_logger(level, log_dir=logging_config.get("log_dir", "logs"),
                         file_logging=logging_config.get("file_logging", False))
        else:
            logging.getLogger().setLevel(level)

    # ------------------------------------------------------------------
    # inputs

    def _load_input(self, args) -> Tuple[Optional[AlgebraBundle], Optional[Subject]]:
        """The bundle (or fixture) named on the command line and its subject, if any"""
        if args.fixture and args.bundle:
            raise PreconditionError("Give either a bundle path or --fixture, not both")
        if args.fixture:
            fixture = get_fixture(args.fixture)
            logger.info(f"Using fixture {fixture.name}: {fixture.description}")
            return fixture.to_bundle(), Subject.from_fixture(fixture)
        if args.bundle:
            bundle = load_bundle(args.bundle)
            subject = None if bundle.is_associative else Subject.from_bundle(bundle)
            return bundle, subject
        return None, None

    def _require_input(self, args) -> Tuple[AlgebraBundle, Optional[Subject]]:
        bundle, subject = self._load_input(args)
        if bundle is None:
            raise PreconditionError(f"{args.command} needs a bundle path or --fixture")
        return bundle, subject

    def _require_subject(self, args) -> Tuple[AlgebraBundle, Subject]:
        bundle, subject = self._require_input(args)
        if subject is None:
            raise PreconditionError(f"{args.command} needs a Lie algebra bundle, not an associative one")
        return bundle, subject

    def _arity(self, args, bundle: Optional[AlgebraBundle]) -> int:
        requested = args.arity
        if requested is None and bundle is not None:
            requested = bundle.max_arity
        return resolve_arity(self.config, requested)

    # ------------------------------------------------------------------
    # commands

    def _dispatch(self, args) -> Report:
        if args.command == 'validate':
            return self._validate(args)
        elif args.command == 'brackets':
            return self._brackets(args)
        elif args.command == 'check':
            return self._check(args)
        elif args.command == 'transfer-check':
            return self._transfer_check(args)
        elif args.command == 'cocone':
            return self._cocone(args)
        elif args.command == 'fiber-model':
            return self._fiber_model(args)
        raise PreconditionError(f"Unknown command {args.command!r}")

    def _validate(self, args) -> Report:
        bundle, _ = self._require_input(args)
        return validate_report(bundle)

    def _brackets(self, args) -> Report:
        bundle, subject = self._require_input(args)
        max_arity = self._arity(args, bundle)
        if bundle.is_associative:
            return koszul_report(bundle, args.source, max_arity)
        gla = subject.gla
        if not gla.has_splitting:
            raise PreconditionError("Higher brackets need a splitting M = L + A; add \"splitting\" to the bundle")
        source = bundle.resolve_source(args.source)
        if not args.via_transfer and not subject.complement_closed:
            raise PreconditionError("A is not closed under the bracket; rerun with --via-transfer")
        logger.info(f"Computing brackets of {args.source} up to arity {max_arity}")
        return brackets_report(gla, source, max_arity, via_transfer=args.via_transfer)

    def _check(self, args) -> Report:
        bundle, subject = self._load_input(args)
        max_arity = self._arity(args, bundle)
        random_config = self.config["random"]
        return run_suite(subject, Suite(args.suite), max_arity, seed=args.seed,
                         random_count=random_config.get("fixtures", 20),
                         max_attempts=random_config.get("max_attempts", 4000),
                         workers=resolve_workers(self.config))

    def _transfer_check(self, args) -> Report:
        bundle, subject = self._require_subject(args)
        bernoulli = mis_signed_bernoulli if args.fault_bernoulli else bernoulli_first
        if args.fault_bernoulli:
            logger.warning("Using a mis-signed Bernoulli table on the closed-form side")
        return transfer_check(subject, self._arity(args, bundle), bernoulli)

    def _cocone(self, args) -> Report:
        bundle, subject = self._require_subject(args)
        return cocone_report(subject, self._arity(args, bundle), args.with_second_algebra,
                             cylinder_oracle=args.with_cylinder_oracle,
                             t_degree_factor=self.config["polyform"].get("t_degree_factor", 2))

    def _fiber_model(self, args) -> Report:
        bundle, subject = self._require_subject(args)
        return fiber_model_report(subject, self._arity(args, bundle), args.with_second_algebra)

    # ------------------------------------------------------------------
    # output

    def _write(self, text: str, path: Optional[str]):
        if path is None:
            print(text)
            return
        try:
            with open(path, "w") as f:
                f.write(text)
                f.write("\n")
        except OSError as e:
            raise BracketsIOError(f"Cannot write report: {e.strerror}", path) from None
        logger.info(f"Report written to {path}")

    def _emit(self, report: Report, output_format: str, path: Optional[str]):
        if output_format == "text":
            self._write(self.manager.text_summary(report), path)
        elif path is None:
            self._write(self.manager.render(report), path)
        elif self.manager.save_report(report, path) is None:
            raise BracketsIOError("Cannot write report", path)

    def _emit_error(self, command: str, diagnostic: Dict[str, Any], output_format: str,
                    path: Optional[str]) -> int:
        """Structured diagnostic in place of a report; always exit code 1"""
        if output_format == "text":
            text = f"{command}: ERROR [{diagnostic['category']}] {diagnostic['message']}"
            for suggestion in diagnostic["suggestions"]:
                text += f"\n  hint: {suggestion}"
        else:
            text = self.manager.render_payload({"ok": False, "command": command, "error": diagnostic})
        try:
            self._write(text, path)
        except BracketsIOError as e:
            logger.error(f"Could not write diagnostic to {path}: {e}")
            print(text)
        return 1
