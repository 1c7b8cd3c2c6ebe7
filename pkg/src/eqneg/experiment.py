"""Batch experiments: scenarios x debtor personas x creditor configurations."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Sequence

import yaml

from .agents.base import AgentBackend
from .agents.creditor import LLMCreditor, LLMDebtor, ScriptedCreditor
from .agents.judge import JudgeBackend, LLMJudge, RuleJudge
from .agents.llm import EndpointConfig
from .agents.personas import ScriptedDebtor, parse_persona
from .agents.recognition import EmotionRecognizer, LLMRecognizer, RuleBasedRecognizer
from .emotions import PayoffMatrix
from .hmm import FitResult, HmmParams, ObservationPair, baum_welch
from .metrics import CellResult, RunReport, summarize
from .policy import ActivationConfig, PolicyState
from .scenarios import Scenario, ScenarioBounds, generate_scenarios, load_scenarios
from .sim import SimConfig, run_negotiation
from .transcript import Transcript, dumps, read_transcript, read_transcripts, write_transcript

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_FAILED = 0, 1, 2, 3
CREDITOR_KINDS = ("vanilla", "eq")
DEFAULT_PERSONAS = (
    "vanilla", "fixed:joy", "fixed:sadness", "fixed:anger", "fixed:fear",
    "intimidation", "cheating", "victim", "stonewalling",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    run_id: str = "run"
    seed: int = 0
    scenario_count: int = 10
    scenarios_path: str | None = None
    bounds: ScenarioBounds = field(default_factory=ScenarioBounds)
    personas: list[str] = field(default_factory=lambda: list(DEFAULT_PERSONAS))
    creditors: list[str] = field(default_factory=lambda: list(CREDITOR_KINDS))
    # "scripted" or "llm" per role; recognizer/judge are "rule" or "llm"
    creditor_backend: str = "scripted"
    debtor_backend: str = "scripted"
    recognizer: str = "rule"
    judge: str = "rule"
    endpoints: dict[str, EndpointConfig] = field(default_factory=dict)
    T_max: int = 20
    k: int = 4
    n: int = 5
    params_path: str | None = None
    payoff_path: str | None = None
    output_dir: str = "runs/out"
    workers: int | None = None
    speed_includes_failures: bool = True
    ci_ddof: int = 0

    def __post_init__(self) -> None:
        if self.scenario_count < 1 and not self.scenarios_path:
            raise ConfigError("scenario_count must be >= 1")
        if not self.personas:
            raise ConfigError("at least one persona is required")
        for p in self.personas:
            try:
                parse_persona(p)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        bad = [c for c in self.creditors if c not in CREDITOR_KINDS]
        if bad or not self.creditors:
            raise ConfigError(f"creditors must be drawn from {CREDITOR_KINDS}, got {self.creditors}")
        for name, value, allowed in (
            ("creditor_backend", self.creditor_backend, ("scripted", "llm")),
            ("debtor_backend", self.debtor_backend, ("scripted", "llm")),
            ("recognizer", self.recognizer, ("rule", "llm")),
            ("judge", self.judge, ("rule", "llm")),
        ):
            if value not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {value!r}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.sim_config()
            self.bounds.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def sim_config(self, seed: int | None = None) -> SimConfig:
        return SimConfig(self.T_max, ActivationConfig(self.k, self.n), self.seed if seed is None else seed)

    def endpoint(self, role: str) -> EndpointConfig:
        return self.endpoints.get(role) or self.endpoints.get("default") or EndpointConfig()

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if "bounds" in doc:
            doc["bounds"] = ScenarioBounds(**doc["bounds"])
        if "endpoints" in doc:
            doc["endpoints"] = {k: EndpointConfig.from_dict(v) for k, v in doc["endpoints"].items()}
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        text = Path(path).read_text(encoding="utf-8")
        try:
            doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        return cls.from_dict(doc)


def cell_seed(run_seed: int, scenario_id: str, persona: str, creditor: str) -> int:
    digest = hashlib.sha256(f"{run_seed}|{scenario_id}|{persona}|{creditor}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def _slug(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", s)


def transcript_path(out_dir: Path, creditor: str, persona: str, scenario_id: str) -> Path:
    return out_dir / "transcripts" / _slug(creditor) / _slug(persona) / f"{_slug(scenario_id)}.jsonl"


def check_output_dir(path: str | Path) -> Path:
    """Create the output directory and prove it is writable."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output path {out} is not writable: {exc}") from exc
    return out


def load_experiment_scenarios(cfg: ExperimentConfig) -> list[Scenario]:
    if cfg.scenarios_path:
        scenarios = load_scenarios(cfg.scenarios_path)
        return scenarios[: cfg.scenario_count] if cfg.scenario_count >= 1 else scenarios
    return generate_scenarios(cfg.seed, cfg.scenario_count, cfg.bounds)


DebtorFactory = Callable[[str, Scenario], AgentBackend]


@dataclass
class _Shared:
    params: HmmParams
    payoff: PayoffMatrix
    recognizer: EmotionRecognizer
    judge: JudgeBackend
    make_debtor: DebtorFactory


def _shared(cfg: ExperimentConfig, make_debtor: DebtorFactory | None) -> _Shared:
    params = HmmParams.load(cfg.params_path) if cfg.params_path else HmmParams.default()
    payoff = PayoffMatrix.load(cfg.payoff_path) if cfg.payoff_path else PayoffMatrix.default()
    recognizer = (
        LLMRecognizer(cfg.endpoint("recognizer")) if cfg.recognizer == "llm" else RuleBasedRecognizer()
    )
    judge = LLMJudge(cfg.endpoint("judge")) if cfg.judge == "llm" else RuleJudge()
    if make_debtor is None:
        if cfg.debtor_backend == "llm":
            def make_debtor(persona: str, scenario: Scenario) -> AgentBackend:
                return LLMDebtor(cfg.endpoint("debtor"), persona)
        else:
            make_debtor = ScriptedDebtor.for_scenario
    return _Shared(params, payoff, recognizer, judge, make_debtor)


def _run_cell(cfg: ExperimentConfig, sh: _Shared, out_dir: Path,
              scenario: Scenario, persona: str, creditor: str) -> tuple[CellResult, Transcript | None]:
    cell = CellResult(scenario.id, persona, creditor)
    try:
        seed = cell_seed(cfg.seed, scenario.id, persona, creditor)
        sim = cfg.sim_config(seed)
        if cfg.creditor_backend == "llm":
            backend: AgentBackend = LLMCreditor(cfg.endpoint("creditor"))
        else:
            backend = ScriptedCreditor(vanilla=creditor == "vanilla")
        state = None
        if creditor == "eq":
            state = PolicyState(params=sh.params, payoff=sh.payoff, activation=sim.activation)
        turns, outcome = run_negotiation(
            scenario, backend, sh.make_debtor(persona, scenario), sh.judge, sh.recognizer, state, sim,
        )
        tr = Transcript(scenario.id, cfg.run_id, turns, outcome)
        path = transcript_path(out_dir, creditor, persona, scenario.id)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_transcript(path, tr)
        cell.transcript_path = str(path.relative_to(out_dir))
        cell.status = outcome.status.value
        cell.rounds = outcome.rounds
        if outcome.final_days is not None:
            cell.multiple = outcome.final_days / scenario.creditor_initial_days
        return cell, tr
    except Exception as exc:  # noqa: BLE001 - cell failures are isolated and reported
        log.warning("cell %s/%s/%s failed: %s", creditor, persona, scenario.id, exc)
        cell.error = f"{type(exc).__name__}: {exc}"
        return cell, None


def run_experiment(cfg: ExperimentConfig, make_debtor: DebtorFactory | None = None) -> RunReport:
    """Run every cell, write transcripts plus ``report.json`` / ``report.txt``."""
    out_dir = check_output_dir(cfg.output_dir)
    scenarios = load_experiment_scenarios(cfg)
    sh = _shared(cfg, make_debtor)
    jobs = [(s, p, c) for c in cfg.creditors for p in cfg.personas for s in scenarios]
    workers = cfg.workers or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda job: _run_cell(cfg, sh, out_dir, *job), jobs))

    report = RunReport(cfg.run_id, cfg.seed, cells=[cell for cell, _ in results])
    for c in cfg.creditors:
        for p in cfg.personas:
            group = [(cell, tr) for cell, tr in results if cell.creditor == c and cell.persona == p]
            transcripts = [tr for _, tr in group if tr is not None]
            report.groups.append(summarize(
                c, p, transcripts, failed=sum(cell.failed for cell, _ in group),
                speed_includes_failures=cfg.speed_includes_failures, ddof=cfg.ci_ddof,
            ))
    write_report(out_dir, report)
    return report


def write_report(out_dir: Path, report: RunReport) -> None:
    (out_dir / "report.json").write_text(dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    (out_dir / "report.txt").write_text(report.table(), encoding="utf-8")


def exit_code(report: RunReport) -> int:
    failed = report.failed_cells
    if failed == 0:
        return EXIT_OK
    return EXIT_FAILED if failed == len(report.cells) else EXIT_PARTIAL


def transcript_sequences(transcripts: Sequence[Transcript]) -> list[list[ObservationPair]]:
    """(D_t, C_t) observation sequences; C_t is the creditor emotion in force
    when the debtor spoke on turn t (Neutral on turn 0)."""
    return [
        [ObservationPair(t.debtor_emotion, t.prior_creditor_emotion) for t in tr.turns]
        for tr in transcripts
        if tr.turns
    ]


def fit_from_transcripts(
    paths: Sequence[str | Path],
    init: HmmParams | None = None,
    max_iters: int = 100,
    tol: float = 1e-6,
    smoothing: float = 0.01,
    fit_contagion: bool = False,
    out_path: str | Path | None = None,
) -> FitResult:
    sequences = transcript_sequences(read_transcripts(paths))
    if not sequences:
        raise ValueError("no transcript contains a usable turn")
    result = baum_welch(sequences, init or HmmParams.default(), max_iters, tol, smoothing, fit_contagion)
    if out_path is not None:
        result.params.save(out_path)
    return result


def report_from_dir(out_dir: str | Path) -> RunReport:
    """Rebuild a report from ``report.json`` and the transcripts it lists."""
    out = Path(out_dir)
    doc = json.loads((out / "report.json").read_text(encoding="utf-8"))
    cells = [CellResult(**c) for c in doc["cells"]]
    groups = []
    keys = list(dict.fromkeys((c.creditor, c.persona) for c in cells))
    for creditor, persona in keys:
        mine = [c for c in cells if (c.creditor, c.persona) == (creditor, persona)]
        transcripts = [read_transcript(out / c.transcript_path) for c in mine if c.transcript_path]
        groups.append(summarize(creditor, persona, transcripts, failed=sum(c.failed for c in mine)))
    return RunReport(doc["run_id"], doc["seed"], groups, cells)
