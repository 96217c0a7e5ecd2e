"""
Report Writer
Writes characterization results as JSON, profile CSVs and a plain-text
summary, and validates the combined report against its schema
"""

import json
import logging
import math
import os
from typing import Any, Dict, Iterable, Optional

import jsonschema
import numpy as np

import config
from estimation import IndependentEstimate, LikelihoodProfile, MleResult
from modelstats import ViolationReport
from noise_model import ONE_QUBIT_PARAMETERS, GatesetModel
from ptm_core import ReportValidationError

SCHEMA_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), config.REPORT_SCHEMA_FILE)


def json_safe(value: Any) -> Any:
    """Plain JSON types with non-finite floats replaced by null"""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return [json_safe(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def load_schema() -> dict:
    with open(SCHEMA_PATH, 'r', encoding='utf-8') as f:
        return json.load(f)


def validate_report(report: dict):
    """Raise ReportValidationError when the report does not match report_schema.json"""
    try:
        jsonschema.validate(instance=report, schema=load_schema(),
                            cls=jsonschema.Draft202012Validator)
    except jsonschema.ValidationError as e:
        path = '/'.join(str(p) for p in e.absolute_path) or '<root>'
        raise ReportValidationError(f"Report invalid at {path}: {e.message}") from e


class ReportWriter:
    """Handle all report output for one characterization run"""

    def __init__(self, output_dir: str = config.OUTPUT_DIR):
        self.output_dir = output_dir
        self.logger = logging.getLogger(__name__)
        os.makedirs(output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def write_json(self, name: str, payload: Any) -> str:
        """
        Write a JSON document into the output directory

        Args:
            name: file name
            payload: anything json_safe can convert

        Returns:
            Path of the written file
        """
        path = self.path(name)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(json_safe(payload), f, indent=2, sort_keys=True)
            f.write('\n')
        self.logger.info(f"Wrote {path}")
        return path

    def write_profiles(self, profiles: Dict[str, LikelihoodProfile],
                       stderrs: Optional[Dict[str, float]] = None):
        """profiles.json plus one profile_<param>.csv per parameter"""
        stderrs = stderrs or {}
        payload = {}
        for name, profile in profiles.items():
            entry = profile.to_dict()
            entry['stderr'] = stderrs.get(name)
            payload[name] = entry
            csv_path = self.path(f"profile_{name}.csv")
            profile.write_csv(csv_path)
            self.logger.debug(f"Wrote {csv_path}")
        self.write_json('profiles.json', payload)

    def write_report(self, report: dict) -> str:
        """Validate and write report.json"""
        report = json_safe(report)
        validate_report(report)
        return self.write_json('report.json', report)

    def write_summary(self, text: str) -> str:
        path = self.path('summary.txt')
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        self.logger.info(f"Wrote {path}")
        return path


def _fmt(value: Optional[float], digits: int = 5) -> str:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return '-'
    return f"{value:.{digits}f}"


def format_summary(independent: Optional[IndependentEstimate], mle: Optional[MleResult],
                   profiles: Dict[str, LikelihoodProfile],
                   violations: Dict[str, Optional[ViolationReport]],
                   fidelities: Dict[str, Optional[float]],
                   gaps: Dict[str, str],
                   generating_model: Optional[GatesetModel] = None,
                   parameters: Iterable[str] = ONE_QUBIT_PARAMETERS) -> str:
    """
    Human-readable run summary

    One row per parameter with the generating value (when the dataset is
    synthetic), the independent estimate and its uncertainty, the MLE value
    and the likelihood interval, followed by the likelihood gain, the
    model-violation verdicts, fidelities and any gaps.
    """
    lines = ["=" * 78, "GATESET CHARACTERIZATION SUMMARY", "=" * 78, ""]
    header = f"{'parameter':<10} {'true':>10} {'independent':>12} {'+/-':>9} {'mle':>10} {'interval':>24}"
    lines += [header, "-" * len(header)]
    for name in parameters:
        true = generating_model.get(name) if generating_model is not None else None
        ind = independent.model.get(name) if independent is not None else None
        unc = independent.uncertainties.get(name) if independent is not None else None
        best = mle.model.get(name) if mle is not None else None
        profile = profiles.get(name)
        interval = f"[{_fmt(profile.lower)}, {_fmt(profile.upper)}]" if profile is not None else '-'
        lines.append(f"{name:<10} {_fmt(true):>10} {_fmt(ind):>12} {_fmt(unc, 4):>9} {_fmt(best):>10} {interval:>24}")
    lines.append("")

    if mle is not None:
        lines.append(f"Log-likelihood: {mle.initial_log_likelihood:.3f} (independent) -> "
                     f"{mle.log_likelihood:.3f} (MLE), increase {mle.improvement:.3f}")
        if mle.boundary_hits:
            lines.append(f"Parameters on their search bound: {', '.join(mle.boundary_hits)}")
    if independent is not None and independent.cz is not None:
        cz = independent.cz
        lines.append(f"CZ: alpha={_fmt(cz.alpha)} beta={_fmt(cz.beta)} "
                     f"p_iz+p_zi={_fmt(cz.sum_iz_zi)} p_zi+p_zz={_fmt(cz.sum_zi_zz)}")
    for label, report in violations.items():
        if report is None:
            continue
        verdict = 'REJECTED' if report.rejected else 'consistent'
        lines.append(f"Model violation ({label}): k={_fmt(report.k_hat, 3)} bound={_fmt(report.bound, 3)} {verdict}")
    for label, fidelity in fidelities.items():
        if fidelity is not None:
            lines.append(f"Average X90 fidelity ({label}): {fidelity:.6f}")
    if independent is not None and independent.flags:
        lines.append(f"Flags: {', '.join(independent.flags)}")
    if gaps:
        lines.append("")
        lines.append("Missing results:")
        for stage, message in sorted(gaps.items()):
            lines.append(f"  {stage}: {message}")
    lines.append("")
    return "\n".join(lines)
