import numpy as np
import pytest

from autagent.audiodsp import synth
from autagent.audiodsp.audio import AudioBuffer, SilentInput, TooShort
from autagent.audiodsp.chords import LABELS, ChordSegment, recognize_chords
from autagent.audiodsp.classify import classify_sound
from autagent.audiodsp.pitch import PitchPoint, track_pitch, track_pitch_frames
from autagent.audiodsp.synth import PITCH_CLASSES
from autagent.audiodsp.tempo import estimate_tempo


def stretch(audio: AudioBuffer, c: float) -> AudioBuffer:
    """Resample so the signal lasts c times as long (tempo divides by c)."""
    x = audio.samples
    n = int(len(x) * c)
    return AudioBuffer(np.interp(np.arange(n) / c, np.arange(len(x)), x), audio.sample_rate)


@pytest.mark.parametrize("bpm", [60, 90, 120, 150, 180])
def test_tempo_on_click_tracks(bpm):
    assert estimate_tempo(synth.click_track(bpm, 8.0)) == pytest.approx(bpm, abs=2)


@pytest.mark.parametrize("seed", range(4))
def test_tempo_90_not_doubled(seed):
    est = estimate_tempo(synth.click_track(90, 8.0, rng=np.random.default_rng(seed)))
    assert abs(est - 90) <= 2


@pytest.mark.parametrize("bpm, c", [(120, 0.8), (120, 1.25), (100, 0.8), (100, 1.25), (90, 1.25)])
def test_tempo_time_stretch(bpm, c):
    est = estimate_tempo(stretch(synth.click_track(bpm, 8.0), c))
    assert est == pytest.approx(bpm / c, rel=0.03)


def test_tempo_preconditions():
    with pytest.raises(TooShort):
        estimate_tempo(synth.click_track(120, 1.5))
    with pytest.raises(SilentInput):
        estimate_tempo(AudioBuffer(np.zeros(16000 * 3)))


@pytest.mark.parametrize("f0", [110.0, 220.0, 440.0, 880.0])
def test_pitch_on_tones(f0):
    points = track_pitch(synth.tone(f0, 4.0))
    assert len(points) == 3
    assert all(abs(p.f0 - f0) <= 0.01 * f0 for p in points)
    assert [p.timestamp for p in points] == [0.0, 1.504, 3.008]


@pytest.mark.parametrize("f0", [130.0, 261.63, 500.0, 1200.0])
def test_pitch_semitone_shift(f0):
    ratio = 2 ** (1 / 12)
    lo = np.median([p.f0 for p in track_pitch_frames(synth.tone(f0, 1.0))])
    hi = np.median([p.f0 for p in track_pitch_frames(synth.tone(f0 * ratio, 1.0))])
    assert hi / lo == pytest.approx(ratio, rel=0.01)


def test_pitch_on_noise_and_silence():
    points = track_pitch(synth.noise(3.0))
    assert all(p.f0 > 0 for p in points)
    with pytest.raises(SilentInput):
        track_pitch(AudioBuffer(np.zeros(16000)))


def test_pitch_omits_silent_frames():
    x = np.concatenate([np.zeros(16000 * 2), synth.tone(440.0, 2.0).samples])
    points = track_pitch(AudioBuffer(x))
    assert points and all(p.timestamp >= 1.9 for p in points)
    times = [p.timestamp for p in points]
    assert times == sorted(set(times))


@pytest.mark.parametrize("root", PITCH_CLASSES)
@pytest.mark.parametrize("quality", ["maj", "min"])
def test_chords_all_triads(root, quality):
    segs = recognize_chords(synth.triad(root, quality, 3.0))
    label = f"{root}:{quality}"
    covered = sum(s.end - s.start for s in segs if s.label == label)
    assert covered >= 0.9 * 3.0
    assert segs[0].label == label


def test_chord_transposition_rotates_label():
    for i, root in enumerate(PITCH_CLASSES):
        shifted = PITCH_CLASSES[(i + 7) % 12]
        a = recognize_chords(synth.triad(root, "min"))[0].label
        b = recognize_chords(synth.triad(shifted, "min"))[0].label
        assert LABELS.index(b) == (LABELS.index(a) + 14) % 24


def test_chord_progression_segments():
    x = np.concatenate([synth.triad("C", "maj", 2.0).samples, synth.triad("A", "min", 2.0).samples])
    segs = recognize_chords(AudioBuffer(x))
    assert [s.label for s in segs] == ["C:maj", "A:min"]
    assert segs[0].start == 0.0 and segs[-1].end == 4.0
    assert abs(segs[1].start - 2.0) <= 0.2


def test_chord_preconditions():
    with pytest.raises(TooShort):
        recognize_chords(synth.triad("C", "maj", 0.5))
    with pytest.raises(SilentInput):
        recognize_chords(AudioBuffer(np.zeros(16000 * 2)))
    with pytest.raises(ValueError):
        ChordSegment(1.0, 1.0, "C:maj")
    with pytest.raises(ValueError):
        ChordSegment(0.0, 1.0, "Bb:maj")
    with pytest.raises(ValueError):
        PitchPoint(0.0, 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_noise_is_noise(seed):
    assert classify_sound(synth.noise(2.0, rng=np.random.default_rng(100 + seed))) == ["noise"]


@pytest.mark.parametrize("bpm", [60, 120, 180])
def test_clicks_are_percussive(bpm):
    assert "click/percussive" in classify_sound(synth.click_track(bpm, 4.0, rng=np.random.default_rng(bpm)))


def test_other_prototypes():
    assert classify_sound(synth.tone(330.0, 1.0))[0] == "tone"
    assert classify_sound(synth.am_tone(165.0, 2.0))[0] == "speech-like"
    with pytest.raises(TooShort):
        classify_sound(synth.noise(0.3))
    with pytest.raises(SilentInput):
        classify_sound(AudioBuffer(np.zeros(16000)))
