"""Real inference engines behind the protocol: pyannote + Whisper (+ DEMUCS).

Heavy dependencies are imported lazily inside the constructors, so this
module imports cleanly without torch installed and the protocol tests can
run with injected fakes. Install the real stack with
``pip install 'pybackend[models]'``.

Engines are stateless across requests apart from the loaded models; any
caching of predictions belongs to the caller.
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

from .config import AdapterConfig


class DemucsDenoiser:
    """Vocals isolation as a pre-step for diarization on noisy audio."""

    def __init__(self, device: str):
        from demucs.api import Separator  # lazy

        self._separator = Separator(model="htdemucs", device=device)

    def __call__(self, audio_path: str) -> str:
        import soundfile  # lazy

        _, sources = self._separator.separate_audio_file(audio_path)
        vocals = sources["vocals"].cpu().numpy().T
        out = tempfile.NamedTemporaryFile(
            prefix=f"denoised_{Path(audio_path).stem}_", suffix=".wav", delete=False
        )
        soundfile.write(out.name, vocals, self._separator.samplerate)
        return out.name


class PyannoteDiarizer:
    """Speaker diarization via a pyannote pipeline.

    ``num_speakers`` is forwarded to the pipeline as a hard constraint; a
    ``threshold`` entry in params is applied to the clustering stage when
    the pipeline exposes one, otherwise ignored with a warning. A requested
    window crops the result (segments are clipped to it).
    """

    def __init__(self, config: AdapterConfig):
        import torch  # lazy
        from pyannote.audio import Pipeline  # lazy

        self._pipeline = Pipeline.from_pretrained(config.diarization_model_id)
        self._pipeline.to(torch.device(config.device))
        self._denoise = DemucsDenoiser(config.device) if config.enable_denoise else None

    def _apply_threshold(self, threshold: float) -> None:
        try:
            parameters = self._pipeline.parameters(instantiated=True)
            clustering = parameters.get("clustering", {})
            clustering["threshold"] = float(threshold)
            parameters["clustering"] = clustering
            self._pipeline.instantiate(parameters)
        except Exception as exc:
            print(f"pybackend: threshold not applied: {exc}", file=sys.stderr)

    def __call__(self, audio_path, num_speakers=None, window=None, params=None):
        params = params or {}
        if "threshold" in params:
            self._apply_threshold(params["threshold"])
        path = self._denoise(audio_path) if self._denoise else audio_path
        kwargs = {}
        if num_speakers is not None:
            kwargs["num_speakers"] = num_speakers
        diarization = self._pipeline(path, **kwargs)
        segments = []
        for turn, _, label in diarization.itertracks(yield_label=True):
            start, end = float(turn.start), float(turn.end)
            if window is not None:
                start = max(start, window[0])
                end = min(end, window[1])
                if start >= end:
                    continue
            segments.append((max(start, 0.0), end, str(label)))
        return segments


class WhisperTranscriber:
    """Windowed transcription via a Hugging Face Whisper checkpoint.

    Only the requested window's samples are loaded and decoded; the caller
    is responsible for keeping windows within the model's input limit.
    """

    SAMPLE_RATE = 16_000

    def __init__(self, config: AdapterConfig):
        from transformers import pipeline  # lazy

        device = 0 if config.device.startswith("cuda") else -1
        self._asr = pipeline(
            "automatic-speech-recognition", model=config.asr_model_id, device=device
        )

    def __call__(self, audio_path, window=None, params=None):
        import librosa  # lazy

        offset, duration = 0.0, None
        if window is not None:
            offset = window[0]
            duration = window[1] - window[0]
        audio, _ = librosa.load(
            audio_path, sr=self.SAMPLE_RATE, mono=True, offset=offset, duration=duration
        )
        result = self._asr({"raw": audio, "sampling_rate": self.SAMPLE_RATE})
        return result["text"].strip()


def build_engines(config: AdapterConfig):
    """Load both models; raising here ends the process after one error line."""
    return PyannoteDiarizer(config), WhisperTranscriber(config)
