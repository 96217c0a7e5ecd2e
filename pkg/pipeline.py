"""
Characterization Pipeline
Simulate a dataset, then run independent estimates, likelihood
maximization, profiles and the model-violation test, surviving failures
of individual stages
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import config
from dataset_store import Dataset, RunConfig, save_dataset, simulate_dataset
from estimation import (
    CzEstimate,
    IndependentEstimate,
    LikelihoodFunction,
    LikelihoodProfile,
    MleResult,
    cz_extract,
    default_profile_grid,
    fit_maximum_likelihood,
    independent_estimates,
    likelihood_profile,
    profile_standard_error,
    readout_extract,
)
from logger_config import IssueMonitor
from modelstats import ViolationReport, model_violation
from noise_model import CZ_PARAMETERS, ONE_QUBIT_PARAMETERS, GatesetModel, average_gate_fidelity
from protocols import circuits_to_json, parse_circuit_id
from ptm_core import CharacterizationError
from report_writer import ReportWriter, format_summary

# independent stage -> parameters it constrains
STAGE_PARAMETERS = {
    'readout': ('r_01', 'r_10'),
    'rpe': ('epsilon', 'theta'),
    'decoherence': ('p_x', 'p_z'),
    'cz': CZ_PARAMETERS,
}


@dataclass
class CharacterizationResult:
    """Everything one characterize run produced; None marks a failed stage"""
    independent: Optional[IndependentEstimate] = None
    mle: Optional[MleResult] = None
    profiles: Dict[str, LikelihoodProfile] = field(default_factory=dict)
    profile_stderrs: Dict[str, float] = field(default_factory=dict)
    violations: Dict[str, Optional[ViolationReport]] = field(default_factory=dict)
    fidelities: Dict[str, Optional[float]] = field(default_factory=dict)
    gaps: Dict[str, str] = field(default_factory=dict)

    @property
    def best_model(self) -> Optional[GatesetModel]:
        if self.mle is not None:
            return self.mle.model
        return self.independent.model if self.independent is not None else None


def dataset_summary(dataset: Dataset) -> dict:
    kinds = Counter(parse_circuit_id(r.circuit_id)[0].value for r in dataset.records)
    return {
        'n_records': len(dataset),
        'kinds': dict(sorted(kinds.items())),
        'provenance': dataset.provenance,
    }


class CharacterizationPipeline:
    """Run the characterization workflow for one configuration"""

    def __init__(self, run_config: Optional[RunConfig] = None, monitor: Optional[IssueMonitor] = None):
        self.run_config = run_config or RunConfig()
        self.monitor = monitor or IssueMonitor()
        self.writer = ReportWriter(self.run_config.output_dir)
        self.logger = logging.getLogger(__name__)

    def simulate(self) -> Dataset:
        """
        Generate the enabled circuit families and sample their shots

        Writes circuits.json and dataset.jsonl into the output directory.

        Returns:
            The simulated Dataset
        """
        run = self.run_config
        families = run.families()
        self.logger.info(f"Generated {len(families)} circuits")
        with open(self.writer.path(config.CIRCUITS_FILE), 'w', encoding='utf-8') as f:
            f.write(circuits_to_json(families))
        dataset = simulate_dataset(run.model, families, run.shots, run.seed)
        path = self.writer.path(config.DATASET_FILE)
        save_dataset(dataset, path)
        self.logger.info(f"Dataset written to {path}")
        return dataset

    def _stage(self, name: str, result: CharacterizationResult, func, *args):
        try:
            return func(*args)
        except CharacterizationError as e:
            self.logger.error(f"{name} failed: {e}", exc_info=True)
            self.monitor.log_error(name, str(e))
            result.gaps[name] = str(e)
            return None

    def fitted_parameters(self, independent: IndependentEstimate) -> List[str]:
        """Parameters the data constrains: those of every independent stage that succeeded"""
        names: List[str] = []
        for stage, parameters in STAGE_PARAMETERS.items():
            if stage in independent.missing:
                continue
            if stage == 'cz' and (independent.cz is None or independent.model.cz is None):
                continue
            names.extend(parameters)
        return names

    def profiles(self, model: GatesetModel, dataset: Dataset, parameters: Sequence[str],
                 result: Optional[CharacterizationResult] = None,
                 likelihood: Optional[LikelihoodFunction] = None) -> CharacterizationResult:
        """Likelihood profile through `model` for each parameter"""
        result = result or CharacterizationResult()
        likelihood = likelihood or LikelihoodFunction(dataset)
        for name in parameters:
            stderr = self._stage(f"profile_{name}", result, profile_standard_error, model, dataset, name, likelihood)
            if stderr is None:
                continue
            grid = default_profile_grid(model, name, stderr)
            profile = self._stage(f"profile_{name}", result, likelihood_profile,
                                  model, dataset, name, grid, self.run_config.pstar, likelihood)
            if profile is None:
                continue
            result.profiles[name] = profile
            result.profile_stderrs[name] = stderr
            if abs(profile.argmax - profile.model_value) > (grid[-1] - grid[0]) / (len(grid) - 1) + 1e-12:
                self.monitor.log_warning('Profile', f"{name} maximum at {profile.argmax:.5g} away from model value "
                                                   f"{profile.model_value:.5g}")
        return result

    def characterize(self, dataset: Dataset, write: bool = True) -> CharacterizationResult:
        """
        Full analysis of a dataset

        Args:
            dataset: count records (any subset of the families)
            write: write the report files into the output directory

        Returns:
            CharacterizationResult; failed stages are listed in gaps
        """
        result = CharacterizationResult()
        self.logger.info(f"Characterizing {len(dataset)} records")

        independent = self._stage('independent', result, independent_estimates, dataset)
        result.independent = independent
        if independent is not None:
            for stage, message in independent.missing.items():
                self.monitor.log_error(stage, message)
                result.gaps[stage] = message
            for flag in independent.flags:
                self.monitor.log_warning('Flag', flag)

        likelihood = None
        if independent is not None:
            parameters = self.fitted_parameters(independent)
            if parameters:
                likelihood = self._stage('likelihood', result, LikelihoodFunction, dataset)
            if likelihood is not None:
                result.mle = self._stage('mle', result, fit_maximum_likelihood,
                                         independent.model, dataset, parameters, likelihood)
            if result.mle is not None:
                for name in result.mle.boundary_hits:
                    self.monitor.log_warning('MLE', f"{name} on its search bound")
                self.profiles(result.mle.model, dataset, parameters, result, likelihood)

        for label, model in (('independent', independent.model if independent else None),
                             ('mle', result.mle.model if result.mle else None)):
            if model is None:
                result.violations[label] = None
                result.fidelities[label] = None
                continue
            report = self._stage(f"violation_{label}", result, model_violation, model, dataset)
            result.violations[label] = report
            if report is not None and report.rejected:
                self.monitor.log_warning('Violation', f"{label} model rejected (bound {report.bound:.3g})")
            result.fidelities[label] = average_gate_fidelity(model)

        if write:
            self.write_reports(dataset, result)
        return result

    def report_payload(self, dataset: Dataset, result: CharacterizationResult) -> dict:
        return {
            'dataset': dataset_summary(dataset),
            'independent': result.independent.to_dict() if result.independent else None,
            'mle': result.mle.to_dict() if result.mle else None,
            'profiles': {
                name: dict(profile.to_dict(), stderr=result.profile_stderrs.get(name))
                for name, profile in result.profiles.items()
            },
            'violation': {k: v.to_dict() if v else None for k, v in result.violations.items()},
            'fidelity': dict(result.fidelities),
            'gaps': dict(result.gaps),
            'issues': self.monitor.get_issue_summary(),
        }

    def write_reports(self, dataset: Dataset, result: CharacterizationResult):
        writer = self.writer
        if result.independent is not None:
            writer.write_json('independent_estimates.json', result.independent.to_dict())
        if result.mle is not None:
            writer.write_json('mle_model.json', result.mle.to_dict())
        writer.write_profiles(result.profiles, result.profile_stderrs)
        writer.write_json('violation.json', {k: v.to_dict() if v else None for k, v in result.violations.items()})
        writer.write_report(self.report_payload(dataset, result))

        generating = None
        if 'model' in dataset.provenance:
            try:
                generating = GatesetModel.from_dict(dataset.provenance['model'])
            except CharacterizationError:
                self.logger.warning("Dataset provenance holds an unreadable model")
        parameters = ONE_QUBIT_PARAMETERS
        if result.best_model is not None and result.best_model.cz is not None:
            parameters = parameters + CZ_PARAMETERS
        writer.write_summary(format_summary(
            result.independent, result.mle, result.profiles, result.violations,
            result.fidelities, result.gaps, generating, parameters,
        ))
        self.logger.info(f"Reports written to {self.run_config.output_dir}")

    def violation(self, dataset: Dataset, model: GatesetModel) -> ViolationReport:
        report = model_violation(model, dataset)
        self.writer.write_json('violation.json', {'model': model.to_dict(), 'violation': report.to_dict()})
        return report

    def cz(self, dataset: Dataset) -> CzEstimate:
        """CZ phases and decay sums, with readout correction when readout records exist"""
        readout = None
        try:
            readout = readout_extract(dataset)
        except CharacterizationError as e:
            self.logger.warning(f"No readout correction for CZ phases: {e}")
        estimate = cz_extract(dataset, readout)
        self.writer.write_json('cz_estimates.json', estimate.to_dict())
        return estimate

    def profile(self, dataset: Dataset, model: GatesetModel,
                parameters: Optional[Sequence[str]] = None) -> CharacterizationResult:
        """Profiles through a given model, written as profiles.json and CSVs"""
        if parameters is None:
            parameters = ONE_QUBIT_PARAMETERS
            if model.cz is not None and dataset.has_two_qubit_records():
                parameters = parameters + CZ_PARAMETERS
        result = self.profiles(model, dataset, parameters)
        self.writer.write_profiles(result.profiles, result.profile_stderrs)
        return result
