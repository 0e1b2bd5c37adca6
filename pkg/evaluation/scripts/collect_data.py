"""
Acceptance Data Collection Script
Synthesizes the stimulus WAVs and simulated event recordings the acceptance runs read.
"""

import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.audio.index import write_wav
from src.config.logging import configure_logging, get_logger
from src.events.index import Roi, write_events
from src.models.index import EventFormat, ScenarioConfig, SensorModel
from src.simulation.index import simulate_scene, simulate_spots
from src.simulation.signals import chirp, speech_like, tone, tones

configure_logging(log_filename="evaluation.log")
logger = get_logger(__name__)

DATASET_DIR = Path(__file__).parent.parent / "datasets"

SCENARIO = ScenarioConfig(width=64, height=64, grain=16.0, margin=32, gain=18.0, motion_rate=100_000.0)
SENSOR = SensorModel(epsilon=0.3)
NOISY_SENSOR = SensorModel(epsilon=0.3, noise_rate=2.0)

STIMULI = {
    "chirp": lambda: chirp(100.0, 5000.0, 5.0, 16_000.0, 0.9),
    "paired_tones": lambda: tones([440.0, 441.0], 4.0, 16_000.0, 0.9),
    "tone_440": lambda: tone(440.0, 2.0, 16_000.0, 0.9),
    "tone_660": lambda: tone(660.0, 2.0, 16_000.0, 0.9),
    "speech": lambda: speech_like(3.0, 16_000.0, 0.8, seed=7),
    "tone_620": lambda: tone(620.0, 2.0, 16_000.0, 0.9),
    "tone_810": lambda: tone(810.0, 2.0, 16_000.0, 0.9),
    "long_chirp": lambda: chirp(100.0, 5000.0, 10.0, 16_000.0, 0.9),
}


def collect(dataset_dir: Path = DATASET_DIR) -> dict:
    """Write every stimulus, then the single-spot, noisy and multi-spot recordings built from them."""
    dataset_dir.mkdir(parents=True, exist_ok=True)
    stimuli = {}
    for name, make in STIMULI.items():
        stimuli[name] = make()
        write_wav(stimuli[name], dataset_dir / f"{name}.wav")
        print(f"Synthesized: {name}")

    recordings = {}
    for name in ("chirp", "paired_tones", "tone_440", "long_chirp"):
        stream, _ = simulate_scene(stimuli[name], SCENARIO, SENSOR)
        recordings[name] = dataset_dir / f"{name}.bin"
        write_events(stream, recordings[name], EventFormat.BIN)
        print(f"Simulated: {name} ({len(stream)} events)")

    stream, _ = simulate_scene(stimuli["speech"], SCENARIO, NOISY_SENSOR)
    recordings["speech_noisy"] = dataset_dir / "speech_noisy.bin"
    write_events(stream, recordings["speech_noisy"], EventFormat.BIN)
    print(f"Simulated: speech_noisy ({len(stream)} events)")

    two_spot = SCENARIO.model_copy(update={"width": 128})
    rois = [Roi(0, 0, 64, 64), Roi(64, 0, 64, 64)]
    stream = simulate_spots([stimuli["tone_440"], stimuli["tone_660"]], rois, two_spot, SENSOR)
    recordings["two_spot"] = dataset_dir / "two_spot.bin"
    write_events(stream, recordings["two_spot"], EventFormat.BIN)
    print(f"Simulated: two_spot ({len(stream)} events)")

    three_spot = SCENARIO.model_copy(update={"width": 192})
    rois = [Roi(0, 0, 64, 64), Roi(64, 0, 64, 64), Roi(128, 0, 64, 64)]
    audios = [stimuli["tone_440"], stimuli["tone_620"], stimuli["tone_810"]]
    stream = simulate_spots(audios, rois, three_spot, SENSOR)
    recordings["three_spot"] = dataset_dir / "three_spot.bin"
    write_events(stream, recordings["three_spot"], EventFormat.BIN)
    print(f"Simulated: three_spot ({len(stream)} events)")

    logger.info("evaluation_data_collected", stimuli=len(stimuli), recordings=len(recordings), path=str(dataset_dir))
    return recordings


if __name__ == "__main__":
    collect()
    print(f"\n✅ Stimuli and recordings saved to {DATASET_DIR}")
