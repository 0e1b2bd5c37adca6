import argparse
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

from src.audio.index import write_wav
from src.config.index import load_flat_config
from src.config.logging import get_logger
from src.metrics.index import write_report
from src.models.index import EventFormat, PipelineConfig
from src.models.signals import Waveform

logger = get_logger(__name__)

# (flag, flat key, type, help) for the flags every pipeline command accepts
PIPELINE_FLAGS = [
    ("--r", "r", int, "neighbor radius in pixels"),
    ("--bin-rate", "bin_rate", float, "realtime aggregation rate in Hz"),
    ("--dt-max-us", "dt_max_us", int, "maximum neighbor age in microseconds"),
    ("--v-max", "v_max", float, "maximum speed in pixels per microsecond"),
    ("--frame-rate", "frame_rate", float, "offline integration frame rate in Hz"),
    ("--pyr-levels", "pyr_levels", int, "offline pyramid depth"),
    ("--pyr-window", "pyr_window", int, "offline averaging window (odd)"),
    ("--pyr-iters", "pyr_iters", int, "offline refinement passes per level"),
    ("--pre-blur", "pre_blur", int, "box blur before offline flow, 0 disables"),
    ("--weight-frame", "weight_frame", str, "later | earlier | both"),
    ("--workers", "workers", int, "threads for offline frame pairs"),
    ("--max-lag", "max_lag", int, "axis alignment search range in samples"),
    ("--align-block", "align_block", int, "per-block alignment length, 0 for whole recording"),
    ("--projection", "projection", str, "average | pca"),
    ("--hp-cutoff", "hp_cutoff", float, "high-pass cutoff in Hz"),
    ("--hp-order", "hp_order", int, "Butterworth order"),
    ("--gate-strength", "gate_strength", float, "spectral gate strength in [0, 1]"),
    ("--gate-window", "gate_window", float, "spectral gate window in ms"),
    ("--gate-freq-smooth", "gate_freq_smooth", float, "gate mask smoothing across frequency in Hz"),
    ("--gate-time-smooth", "gate_time_smooth", float, "gate mask smoothing across time in ms"),
    ("--gate-n-std", "gate_n_std", float, "gate threshold above the noise floor in std units"),
    ("--normalize-peak", "normalize_peak", float, "peak level before WAV export"),
    ("--out-rate", "out_rate", int, "output sample rate in Hz"),
    ("--epsilon", "epsilon", float, "contrast threshold"),
    ("--noise-rate", "noise_rate", float, "background events per pixel per second"),
    ("--refractory-us", "refractory_us", int, "per-pixel dead time in microseconds"),
    ("--gain", "gain", float, "pixels of displacement per unit audio amplitude"),
    ("--grain", "grain", float, "speckle grain in pixels"),
    ("--margin", "margin", int, "speckle field margin in pixels"),
    ("--width", "width", int, "sensor width"),
    ("--height", "height", int, "sensor height"),
    ("--direction-deg", "direction_deg", float, "translation direction in degrees"),
    ("--motion-rate", "motion_rate", float, "motion sample rate in Hz"),
    ("--drift-px", "drift_px", float, "slow scene drift amplitude in pixels"),
    ("--drift-hz", "drift_hz", float, "slow scene drift frequency in Hz"),
]


def add_global_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file (default: VIBRO_CONFIG)")
    parser.add_argument("--seed", type=int, help="seed for the simulator")
    parser.add_argument("--mode", choices=["realtime", "offline"], help="flow backend")
    parser.add_argument("--causal", action="store_true", default=None, help="single-pass causal high-pass")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", dest="set_values", help="override any config key"
    )
    group = parser.add_argument_group("pipeline")
    for flag, key, kind, help_text in PIPELINE_FLAGS:
        group.add_argument(flag, dest=key, type=kind, help=help_text)


def flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    for item in getattr(args, "set_values", []) or []:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        overrides[key.lower()] = value
    for key in ["seed", "mode", "causal"] + [key for _, key, _, _ in PIPELINE_FLAGS]:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return overrides


def resolve_config(args: argparse.Namespace, extra: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    """Defaults < config file < flags. Every model validates before any processing starts."""
    overrides = flag_overrides(args)
    overrides.update({k: v for k, v in (extra or {}).items() if v is not None})
    values = load_flat_config(getattr(args, "config", None), overrides)
    cfg = PipelineConfig.from_flat(values)
    logger.info("config_resolved", mode=cfg.mode.value, keys=len(values))
    return cfg


def event_format_for(path: Union[str, Path], default: EventFormat) -> EventFormat:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return EventFormat.CSV
    if suffix in (".bin", ".evs"):
        return EventFormat.BIN
    return default


def write_wav_atomic(waveform: Waveform, path: Union[str, Path]) -> None:
    """Write through a temp file in the target directory; a failed write leaves no WAV behind."""
    path = Path(path)
    handle, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
    os.close(handle)
    try:
        write_wav(waveform, temp_name)
        os.replace(temp_name, path)
    except BaseException:
        Path(temp_name).unlink(missing_ok=True)
        raise


def report_path(output: Union[str, Path]) -> Path:
    output = Path(output)
    return output.with_name(f"{output.stem}.report.txt")


def write_run_report(output: Union[str, Path], stats, cfg: Optional[PipelineConfig], fields: Mapping[str, Any]) -> Path:
    values: Dict[str, Any] = {"command": stats.command, "run_id": stats.run_id}
    if cfg is not None:
        values.update(cfg.to_flat())
    values.update(fields)
    values["wall_seconds"] = round(stats.elapsed(), 6)
    path = report_path(output)
    write_report(values, path)
    return path


def print_summary(pairs: Iterable[tuple]) -> None:
    print(" ".join(f"{key}={value}" for key, value in pairs))


def input_format(path: Union[str, Path], flag: Optional[str], cfg: PipelineConfig) -> EventFormat:
    """Explicit --format wins, then the file suffix, then events_format."""
    if flag:
        return EventFormat(flag)
    return event_format_for(path, cfg.scenario.events_format)
