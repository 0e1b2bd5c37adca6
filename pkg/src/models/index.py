from enum import Enum
from typing import Any, Dict, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config.logging import get_logger

logger = get_logger(__name__)


class EventFormat(str, Enum):
    CSV = "csv"
    BIN = "bin"


class RecoveryMode(str, Enum):
    REALTIME = "realtime"
    OFFLINE = "offline"


class Projection(str, Enum):
    AVERAGE = "average"
    PCA = "pca"


class WeightFrame(str, Enum):
    LATER = "later"
    EARLIER = "earlier"
    BOTH = "both"


class _FlatModel(BaseModel):
    """Frozen model whose field aliases are the flat config keys."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True, use_enum_values=False)

    @classmethod
    def flat_keys(cls) -> Dict[str, str]:
        # flat key -> field name
        return {(field.alias or name): name for name, field in cls.model_fields.items()}

    def to_flat(self) -> Dict[str, Any]:
        flat = {}
        for key, name in self.flat_keys().items():
            value = getattr(self, name)
            flat[key] = value.value if isinstance(value, Enum) else value
        return flat


class SensorModel(_FlatModel):
    epsilon: float = Field(0.2, gt=0, description="Contrast threshold on log-intensity")
    floor: float = Field(1e-3, gt=0, description="Minimum intensity clamp before the log")
    noise_rate: float = Field(0.0, ge=0, description="Spurious events per pixel per second")
    refractory_us: int = Field(0, ge=0, description="Per-pixel dead time in microseconds")


class ScenarioConfig(_FlatModel):
    seed: int = Field(0, description="Seed for the speckle field and noise")
    width: int = Field(96, ge=1, description="Simulated sensor width in pixels")
    height: int = Field(96, ge=1, description="Simulated sensor height in pixels")
    grain: float = Field(12.0, ge=1, description="Speckle correlation length in pixels")
    margin: int = Field(40, ge=0, description="Field border beyond the sensor in pixels")
    gain: float = Field(16.0, gt=0, description="Pixels of displacement per unit audio amplitude")
    direction_deg: float = Field(30.0, description="Direction of the vibration-induced translation")
    motion_rate: float = Field(100_000.0, gt=0, description="Motion sample rate in Hz")
    drift_px: float = Field(0.0, ge=0, description="Amplitude of superimposed slow scene motion")
    drift_hz: float = Field(1.0, gt=0, description="Frequency of superimposed slow scene motion")
    drift_direction_deg: float = Field(0.0, description="Direction of superimposed slow scene motion")
    input_wav: Optional[str] = Field(None, description="Audio driving the simulated surface")
    output_events: Optional[str] = Field(None, description="Where simulate writes events")
    events_format: EventFormat = Field(EventFormat.BIN, description="Output event file format")


class FlowConfig(_FlatModel):
    r: int = Field(7, ge=1, description="Neighbor radius in pixels")
    bin_rate: float = Field(100_000.0, gt=0, description="Aggregation rate in Hz")
    dt_max_us: int = Field(10_000, gt=0, description="Maximum usable neighbor age in microseconds")
    v_max: float = Field(1.0, gt=0, description="Maximum plausible speed in pixels per microsecond")
    chunk_size: int = Field(1 << 16, ge=1, description="Events per estimation chunk")
    queue_size: int = Field(4, ge=1, description="Chunks buffered between estimation and aggregation")


class PyramidConfig(_FlatModel):
    levels: int = Field(3, ge=1, alias="pyr_levels", description="Pyramid depth")
    window: int = Field(15, ge=3, alias="pyr_window", description="Averaging window in pixels")
    iterations: int = Field(3, ge=1, alias="pyr_iters", description="Refinement passes per level")
    downscale: float = Field(0.5, gt=0, lt=1, alias="pyr_downscale", description="Per-level scale factor")
    poly_n: int = Field(5, ge=3, description="Pixel neighborhood of the polynomial expansion")
    poly_sigma: float = Field(1.1, gt=0, description="Gaussian sigma of the polynomial expansion")

    @field_validator("window")
    @classmethod
    def window_must_be_odd(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("pyr_window must be odd")
        return value


class OfflineConfig(_FlatModel):
    frame_rate: float = Field(20_000.0, gt=0, description="Integration frame rate in Hz")
    pre_blur: int = Field(3, ge=0, description="Box blur size before flow, 0 or 1 disables")
    weight_frame: WeightFrame = Field(WeightFrame.LATER, description="Which frame's counts weight the mean")
    workers: int = Field(0, ge=0, description="Threads for frame-pair flow, 0 means VIBRO_WORKERS")


class RecoveryConfig(_FlatModel):
    max_lag: int = Field(50, ge=0, description="Alignment search range in samples")
    align_block: int = Field(0, ge=0, description="Per-block alignment length in samples, 0 for whole recording")
    projection: Projection = Field(Projection.AVERAGE, description="How the two axes become one signal")
    hp_cutoff: float = Field(30.0, gt=0, description="High-pass cutoff in Hz")
    hp_order: int = Field(4, ge=1, description="Butterworth order")
    causal: bool = Field(False, description="Single-pass causal high-pass instead of zero phase")
    gate_strength: float = Field(0.8, ge=0, le=1, description="Attenuation applied to gated cells")
    gate_freq_smooth: float = Field(50.0, ge=0, description="Mask smoothing across frequency in Hz")
    gate_time_smooth: float = Field(100.0, ge=0, description="Mask smoothing across time in ms")
    gate_window: float = Field(100.0, gt=0, description="STFT window in ms")
    gate_n_std: float = Field(1.5, ge=0, description="Threshold above the noise floor in noise std units")
    out_rate: int = Field(16_000, gt=0, description="Output sample rate in Hz")
    normalize_peak: float = Field(0.9, gt=0, le=1, description="Peak level before WAV export")

    @field_validator("hp_cutoff")
    @classmethod
    def warn_on_unusual_cutoff(cls, value: float) -> float:
        if not 10.0 <= value <= 100.0:
            logger.warning("highpass_cutoff_outside_range", hp_cutoff=value, recommended_min=10.0, recommended_max=100.0)
        return value


class PipelineConfig(BaseModel):
    """All stage configs, loaded from one flat key-value mapping."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: RecoveryMode = Field(RecoveryMode.REALTIME, description="Flow backend")
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    sensor: SensorModel = Field(default_factory=SensorModel)
    flow: FlowConfig = Field(default_factory=FlowConfig)
    pyramid: PyramidConfig = Field(default_factory=PyramidConfig)
    offline: OfflineConfig = Field(default_factory=OfflineConfig)
    recovery: RecoveryConfig = Field(default_factory=RecoveryConfig)

    @model_validator(mode="after")
    def check_recovery_against_rates(self) -> "PipelineConfig":
        if self.recovery.hp_cutoff >= self.recovery.out_rate / 2:
            raise ValueError("hp_cutoff must be below the output Nyquist frequency")
        return self

    @classmethod
    def sections(cls) -> Dict[str, type]:
        return {
            "scenario": ScenarioConfig,
            "sensor": SensorModel,
            "flow": FlowConfig,
            "pyramid": PyramidConfig,
            "offline": OfflineConfig,
            "recovery": RecoveryConfig,
        }

    @classmethod
    def from_flat(cls, values: Mapping[str, Any]) -> "PipelineConfig":
        """Route every flat key to the model that owns it; unknown keys are rejected."""
        owners: Dict[str, str] = {}
        for section, model in cls.sections().items():
            for key in model.flat_keys():
                owners[key] = section

        grouped: Dict[str, Dict[str, Any]] = {section: {} for section in cls.sections()}
        mode = None
        unknown = []
        for key, value in values.items():
            if key == "mode":
                mode = value
            elif key in owners:
                grouped[owners[key]][key] = value
            else:
                unknown.append(key)
        if unknown:
            raise ValueError(f"Unknown config keys: {', '.join(sorted(unknown))}")

        payload: Dict[str, Any] = {section: model(**grouped[section]) for section, model in cls.sections().items()}
        if mode is not None:
            payload["mode"] = mode
        return cls(**payload)

    def to_flat(self) -> Dict[str, Any]:
        flat: Dict[str, Any] = {"mode": self.mode.value}
        for section in self.sections():
            flat.update(getattr(self, section).to_flat())
        return flat
