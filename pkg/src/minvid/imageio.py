"""Stimulus import and export.

Frames are stored as individual 8-bit grayscale PNGs referenced by content
hash.  Color originals are converted at ingestion with Rec. 601 luma
weights, rounded half-up.  Looped stimuli are exported as GIF89a with an
exact 50-centisecond frame delay (2 Hz) and infinite repeat; pixel values
survive the round trip bit-for-bit.
"""

from __future__ import annotations

import hashlib
import io
import re
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import FrameGrid, SourceClip, VideoConfig, clip_content_id, render
from .manifest import ClipEntry


class BadImage(ValueError):
    pass


class RoiOutOfBounds(ValueError):
    pass


class TooManyFrames(ValueError):
    pass


class WriteFailure(OSError):
    pass


def luma_rec601(rgb: np.ndarray) -> np.ndarray:
    """Grayscale via integer Rec. 601 weights (0.299, 0.587, 0.114), half-up."""
    r = rgb[..., 0].astype(np.int64)
    g = rgb[..., 1].astype(np.int64)
    b = rgb[..., 2].astype(np.int64)
    weighted = 299 * r + 587 * g + 114 * b
    return ((2 * weighted + 1000) // 2000).astype(np.uint8)


def load_grayscale(path: str | Path) -> np.ndarray:
    """Decode an image file to a 2-D uint8 array, converting color inputs."""
    try:
        with Image.open(path) as im:
            if im.mode == "L":
                return np.asarray(im, dtype=np.uint8)
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise BadImage(f"cannot decode {path}: {exc}") from exc
    return luma_rec601(rgb)


def png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def read_png(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode != "L":
                raise BadImage(f"{path} is not an 8-bit grayscale PNG")
            return np.asarray(im, dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise BadImage(f"cannot decode {path}: {exc}") from exc


def frame_ref(pixels: np.ndarray) -> str:
    """Content-addressed filename for one frame."""
    h = hashlib.sha256()
    h.update(b"%d:%d;" % pixels.shape)
    h.update(pixels.tobytes())
    return f"{h.hexdigest()[:24]}.png"


def store_frames(frames: list[FrameGrid], frames_dir: str | Path) -> list[str]:
    frames_dir = Path(frames_dir)
    frames_dir.mkdir(parents=True, exist_ok=True)
    refs = []
    for frame in frames:
        ref = frame_ref(frame.pixels)
        target = frames_dir / ref
        if not target.exists():
            target.write_bytes(png_bytes(frame.pixels))
        refs.append(ref)
    return refs


def load_clip(entry: ClipEntry, frames_dir: str | Path) -> SourceClip:
    frames_dir = Path(frames_dir)
    frames = tuple(FrameGrid(read_png(frames_dir / ref)) for ref in entry.frame_refs)
    return SourceClip(
        clip_id=entry.clip_id,
        frames=frames,
        action_category=entry.action_category,
        answer_key_id=entry.answer_key_id,
    )


_NUM = re.compile(r"(\d+)")


def _numeric_order(name: str):
    return [int(part) if part.isdigit() else part for part in _NUM.split(name)]


def list_frame_files(directory: str | Path) -> list[Path]:
    files = [p for p in Path(directory).iterdir() if p.suffix.lower() == ".png"]
    return sorted(files, key=lambda p: _numeric_order(p.name))


def import_clip(
    directory: str | Path,
    roi: tuple[int, int, int],
    frame_picks: list[int],
    category: str,
    answer_key_id: str,
) -> SourceClip:
    """Build a SourceClip from numbered PNG frames.

    ``roi`` is (x, y, side) in source-frame coordinates; ``frame_picks``
    index into the numerically sorted frame files.  The clip id is the
    content hash of the cropped ROI pixels, so re-importing identical
    pixels yields the identical clip.
    """
    if not 1 <= len(frame_picks) <= 5:
        raise TooManyFrames("pick between 1 and 5 frames, got %d" % len(frame_picks))
    if len(set(frame_picks)) != len(frame_picks):
        raise ValueError("frame picks must be distinct")
    files = list_frame_files(directory)
    if not files:
        raise BadImage(f"no PNG frames found in {directory}")
    x, y, side = roi
    if side < 1:
        raise RoiOutOfBounds("ROI side must be >= 1")
    grids = []
    for pick in frame_picks:
        if not 0 <= pick < len(files):
            raise ValueError(f"frame pick {pick} outside 0..{len(files) - 1}")
        pixels = load_grayscale(files[pick])
        height, width = pixels.shape
        if x < 0 or y < 0 or x + side > width or y + side > height:
            raise RoiOutOfBounds(
                f"ROI {roi} outside frame bounds {width}x{height} ({files[pick].name})"
            )
        grids.append(FrameGrid(pixels[y : y + side, x : x + side]))
    frames = tuple(grids)
    return SourceClip(
        clip_id=clip_content_id(frames),
        frames=frames,
        action_category=category,
        answer_key_id=answer_key_id,
    )


_IDENTITY_PALETTE = bytes(v for level in range(256) for v in (level, level, level))


def _palette_frame(pixels: np.ndarray) -> Image.Image:
    """P-mode image whose palette index equals the gray value, losslessly."""
    im = Image.frombytes("P", (pixels.shape[1], pixels.shape[0]), pixels.tobytes())
    im.putpalette(_IDENTITY_PALETTE)
    return im


def loop_gif_bytes(frames: list[FrameGrid], fps: int) -> bytes:
    """Encode frames as an infinitely looping GIF with exact frame delays.

    Delay is 1000/fps ms per frame (50 cs at the default 2 Hz); pixel
    values survive bit-for-bit through the identity palette.  Encoder
    settings are fixed, so identical frames give identical bytes.
    """
    images = [_palette_frame(f.pixels) for f in frames]
    delay_ms = round(1000 / fps)
    buf = io.BytesIO()
    if len(images) == 1:
        images[0].save(buf, format="GIF", optimize=False)
    else:
        images[0].save(
            buf,
            format="GIF",
            save_all=True,
            append_images=images[1:],
            duration=delay_ms,
            loop=0,  # infinite
            optimize=False,
        )
    return buf.getvalue()


def export_loop(config: VideoConfig, clip: SourceClip, path: str | Path) -> Path:
    """Write the rendered configuration as an infinitely looping GIF."""
    path = Path(path)
    data = loop_gif_bytes(render(config, clip), config.fps)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise WriteFailure(f"cannot write {path}: {exc}") from exc
    return path


def decode_gif(path: str | Path) -> tuple[list[np.ndarray], list[int], int | None]:
    """Decode a GIF into (frames, per-frame delay in ms, loop count)."""
    frames: list[np.ndarray] = []
    delays: list[int] = []
    with Image.open(path) as im:
        loop = im.info.get("loop")
        for index in range(getattr(im, "n_frames", 1)):
            im.seek(index)
            delays.append(int(im.info.get("duration", 0)))
            frames.append(np.asarray(im.convert("L"), dtype=np.uint8))
    return frames, delays, loop


def gif_frame_delays_cs(data: bytes) -> list[int]:
    """Raw Graphic Control Extension delays, in centiseconds.

    Parsed straight from the byte stream, independent of any decoder.
    """
    delays = []
    i = 0
    while i < len(data) - 7:
        if data[i] == 0x21 and data[i + 1] == 0xF9 and data[i + 2] == 0x04:
            delays.append(data[i + 4] | (data[i + 5] << 8))
            i += 8
        else:
            i += 1
    return delays


def gif_loop_count(data: bytes) -> int | None:
    """Loop count from the Netscape application extension; 0 = infinite."""
    marker = b"NETSCAPE2.0"
    at = data.find(marker)
    if at < 0:
        return None
    # marker, then sub-block: 0x03 0x01 <lo> <hi>
    sub = at + len(marker)
    if data[sub : sub + 2] != b"\x03\x01":
        return None
    return data[sub + 2] | (data[sub + 3] << 8)
