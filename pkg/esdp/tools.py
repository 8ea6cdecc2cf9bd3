from typing import Dict, Any, List, Iterable, Sequence
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from lxml import etree
from tqdm import tqdm

from .config import DEFAULT_EXTENSIONS
from .errors import UnparsableSource
from .extractor import ControlMarker, SourceItem, extract_items

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractedFile:
    file_label: str
    items: List[SourceItem]
    markers: List[ControlMarker]


def discover_sources(corpus_dirs: Iterable[Path], extensions: Sequence[str] = DEFAULT_EXTENSIONS) -> List[Path]:
    """
    Recursively list source files under the corpus directories.

    Args:
        corpus_dirs: directories (or single files) to scan.
        extensions: accepted suffixes, compared case-insensitively.

    Returns:
        sorted, de-duplicated list of file paths.
    """
    wanted = {ext.lower() for ext in extensions}
    found = set()
    for root in corpus_dirs:
        root = Path(root)
        if root.is_file():
            found.add(root)
            continue
        if not root.is_dir():
            raise FileNotFoundError(f"corpus directory not found: {root}")
        for dirpath, _, filenames in os.walk(root):
            for name in filenames:
                if Path(name).suffix.lower() in wanted:
                    found.add(Path(dirpath) / name)
    return sorted(found)


def _extract_file(path: Path, strict: bool) -> ExtractedFile | None:
    label = path.as_posix()
    source = path.read_text(encoding="utf-8", errors="replace")
    try:
        items, markers = extract_items(source, label)
    except UnparsableSource as exc:
        if strict:
            raise
        logger.warning("skipping %s: %s", label, exc)
        return None
    return ExtractedFile(label, items, markers)


def extract_corpus(
    corpus_dirs: Iterable[Path],
    extensions: Sequence[str] = DEFAULT_EXTENSIONS,
    workers: int = 1,
    strict: bool = False,
) -> List[ExtractedFile]:
    """
    Extract every source file of a corpus.

    Files are processed on a thread pool; results come back in path order
    regardless of scheduling. Unparsable files are logged and skipped unless
    strict is set, in which case the first failure propagates.

    Args:
        corpus_dirs: directories to scan.
        extensions: file suffixes to include.
        workers: thread pool size.
        strict: re-raise UnparsableSource instead of skipping.

    Returns:
        list of ExtractedFile, one per successfully parsed file.
    """
    paths = discover_sources(corpus_dirs, extensions)
    logger.info("extracting %d files with %d workers", len(paths), workers)
    progress = dict(total=len(paths), unit="file", file=sys.stderr, disable=not sys.stderr.isatty())
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(tqdm(pool.map(lambda p: _extract_file(p, strict), paths), **progress))
    return [result for result in results if result is not None]


def corpus_items(files: Iterable[ExtractedFile]) -> List[SourceItem]:
    return [item for extracted in files for item in extracted.items]


def corpus_markers(files: Iterable[ExtractedFile]) -> List[ControlMarker]:
    return [marker for extracted in files for marker in extracted.markers]


def canonical_xml(root: etree._Element) -> bytes:
    """UTF-8, LF line endings, two-space indentation, XML declaration."""
    etree.indent(root, space="  ")
    return etree.tostring(root, pretty_print=True, xml_declaration=True, encoding="UTF-8")


def export_report(text: str, path: Path | None = None) -> Dict[str, Any]:
    """
    Write a report to a file, or to stdout when no path is given.

    Args:
        text: the report content.
        path: destination file; parent directories are created.

    Returns:
        dict with:
          - path: file written, or "-" for stdout
          - chars: number of characters written
    """
    if path is None:
        sys.stdout.write(text)
        return {"path": "-", "chars": len(text)}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return {"path": str(path), "chars": len(text)}


def write_bytes_atomic(data: bytes, path: Path) -> Path:
    """Write through a sibling temp file so readers never see a partial repo."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return path
