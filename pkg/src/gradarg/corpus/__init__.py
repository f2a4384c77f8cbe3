"""Bundled frailty-assessment corpora and their scenario descriptors.

Each corpus is an ``.af`` framework file plus a TOML descriptor naming the
enumerable toggles, derived-activation rules, the preference profile, and the
label provenance (prose-sourced vs placeholder). The descriptor must agree
with the framework file; the loader cross-checks to guard against drift.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..afformat import SourceDocument, parse_framework
from ..analysis import Scenario
from ..errors import UnknownCorpusError
from ..model import Framework
from ..preferences import Sign

CORPUS_ENV_VAR = "GRADARG_CORPUS_DIR"
_ALIASES = {
    "frailty_s1": "frailty_scenario1",
    "frailty_s2": "frailty_scenario2",
}


def corpus_dir(override: str | os.PathLike | None = None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get(CORPUS_ENV_VAR)
    if env:
        return Path(env)
    return Path(__file__).resolve().parent


def list_corpora(directory: str | os.PathLike | None = None) -> list[str]:
    base = corpus_dir(directory)
    return sorted(p.stem for p in base.glob("*.af"))


def load_corpus(
    name: str, directory: str | os.PathLike | None = None
) -> tuple[Framework, Scenario]:
    """Load a bundled corpus by name (aliases frailty_s1/frailty_s2 accepted)."""
    base = corpus_dir(directory)
    resolved = _ALIASES.get(name, name)
    af_path = base / f"{resolved}.af"
    if not af_path.exists():
        raise UnknownCorpusError(f"no corpus {name!r} in {base}")
    framework = parse_framework(SourceDocument.from_file(af_path))

    descriptor_path = af_path.with_suffix(".toml")
    toggles: tuple[str, ...]
    provenance: dict[str, str] = {}
    if descriptor_path.exists():
        with open(descriptor_path, "rb") as handle:
            descriptor = tomllib.load(handle)
        toggles = tuple(descriptor.get("toggles", ()))
        provenance = dict(descriptor.get("provenance", {}))
        _check_descriptor(resolved, framework, descriptor)
    else:
        toggles = tuple(
            aid for aid in sorted(framework.arguments) if not framework.is_option(aid)
        )

    return framework, Scenario(
        name=resolved, framework=framework, toggles=toggles, provenance=provenance
    )


def _check_descriptor(name: str, framework: Framework, descriptor: dict) -> None:
    derived = descriptor.get("derived", {})
    for aid, deps in derived.items():
        arg = framework.argument(aid)
        if tuple(sorted(deps)) != arg.derived_active_from:
            raise UnknownCorpusError(
                f"corpus {name}: descriptor derived rule for {aid} disagrees with the framework"
            )
    for arg in framework.arguments.values():
        if arg.derived_active_from and arg.id not in derived:
            raise UnknownCorpusError(
                f"corpus {name}: framework rule for {arg.id} missing from the descriptor"
            )
    prefs = descriptor.get("preferences", {})
    for user, signs in prefs.items():
        for option, token in signs.items():
            if framework.preferences.sign(user, option) is not Sign.from_token(token):
                raise UnknownCorpusError(
                    f"corpus {name}: descriptor preference ({user}, {option}) disagrees"
                )
