from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .core import InputError, SourceSentence, Vocab
from .results_io import ensure_dir


def _read_lines(path: Path) -> list[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise InputError(f"Corpus file not found: {path}") from None
    except UnicodeDecodeError as e:
        lineno = e.object[: e.start].count(b"\n") + 1
        raise InputError(f"{path}:{lineno}: not valid UTF-8 (byte {e.object[e.start]:#04x})") from None


def _resolve(vocab: Vocab, text: str, where: str) -> tuple[int, ...]:
    ids = []
    for tok in text.split():
        try:
            ids.append(vocab.resolve(tok))
        except InputError:
            raise InputError(f"{where}: unknown token {tok!r}") from None
    return tuple(ids)


def read_corpus(path: Path, vocab: Vocab) -> list[SourceSentence]:
    """One sentence per line: whitespace-separated token strings or integer ids."""
    out = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        where = f"{path}:{lineno}"
        ids = _resolve(vocab, line, where)
        if not ids:
            raise InputError(f"{where}: empty source sentence")
        out.append(SourceSentence(ids))
    if not out:
        raise InputError(f"Corpus is empty: {path}")
    return out


def read_parallel_corpus(path: Path, vocab: Vocab) -> list[tuple[SourceSentence, tuple[int, ...]]]:
    """Tab-separated source and target per line; the target may be empty."""
    out = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        where = f"{path}:{lineno}"
        parts = line.split("\t")
        if len(parts) != 2:
            raise InputError(f"{where}: expected 'source<TAB>target', found {len(parts) - 1} tab(s)")
        src = _resolve(vocab, parts[0], where)
        if not src:
            raise InputError(f"{where}: empty source sentence")
        out.append((SourceSentence(src), _resolve(vocab, parts[1], where)))
    if not out:
        raise InputError(f"Corpus is empty: {path}")
    return out


def read_any_corpus(path: Path, vocab: Vocab) -> tuple[list[SourceSentence], list[tuple[int, ...]] | None]:
    """Sources plus references when every line carries a tab, else sources only."""
    lines = _read_lines(path)
    if lines and all("\t" in line for line in lines):
        pairs = read_parallel_corpus(path, vocab)
        return [s for s, _ in pairs], [t for _, t in pairs]
    return read_corpus(path, vocab), None


def write_corpus(path: Path, lines: Sequence[Sequence[str]], targets: Sequence[Sequence[str]] | None = None) -> None:
    ensure_dir(path.parent)
    rows = []
    for i, src in enumerate(lines):
        row = " ".join(src)
        if targets is not None:
            row += "\t" + " ".join(targets[i])
        rows.append(row + "\n")
    path.write_text("".join(rows), encoding="utf-8")


def vocab_from_parallel_corpus(path: Path, *, bos: str = "<s>", eos: str = "</s>") -> Vocab:
    """BOS, EOS, then every other token in order of first appearance."""
    tokens = [bos, eos]
    seen = set(tokens)
    for line in _read_lines(path):
        for tok in line.replace("\t", " ").split():
            if tok not in seen:
                seen.add(tok)
                tokens.append(tok)
    return Vocab(tuple(tokens), eos_id=1, bos_id=0)
