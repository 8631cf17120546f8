"""Line-oriented text format and JSON mirror for coloured triangulations.

Text layout::

    veering 1
    genus 1
    marked 1
    triangle c+ a+ b+
    triangle c- a- b-
    colours a=B b=R c=B
    geometry
    a 0.29999999999999999 -0.5
    ...

Blank lines and ``#`` comments are ignored.  The geometry block is
optional; numbers are written with 17 significant digits so they read back
exactly.
"""

import json
import re

from .geometry import SurfaceState
from .triangulation import Colour, Triangulation, label_key

FORMAT_VERSION = 1
_SLOT = re.compile(r"^([A-Za-z0-9_]+)([+-])$")


class ParseError(ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class InvariantError(ParseError):
    """The file is well formed but describes an invalid triangulation."""


def _num(v):
    return format(float(v), ".17g")


def serialize(t, vectors=None):
    lines = [f"veering {FORMAT_VERSION}", f"genus {t.genus}", f"marked {t.marked}"]
    for tri in t.triangles:
        lines.append("triangle " + " ".join(f"{s.label}{'+' if s.sign > 0 else '-'}" for s in tri))
    lines.append("colours " + " ".join(f"{l}={t.colour(l).value}" for l in t.labels))
    if vectors:
        lines.append("geometry")
        for l in t.labels:
            dx, dy = vectors[l]
            lines.append(f"{l} {_num(dx)} {_num(dy)}")
    return "\n".join(lines) + "\n"


def _column(raw, token, start=0):
    return raw.index(token, start) + 1


def parse(text):
    """(Triangulation, vectors or None) from the text format."""
    header = {}
    triangles, tri_lines = [], []
    colours, colour_line = None, None
    vectors = None
    seen_tris = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        key = words[0]
        if vectors is not None:
            if len(words) != 3:
                raise ParseError("geometry lines are 'label dx dy'", n, 1)
            try:
                vectors[words[0]] = (float(words[1]), float(words[2]))
            except ValueError as exc:
                raise ParseError(f"bad number: {exc}", n, _column(raw, words[1])) from exc
            continue
        if key in ("veering", "genus", "marked"):
            if key in header:
                raise ParseError(f"repeated {key} line", n, 1)
            if len(words) != 2 or not words[1].lstrip("-").isdigit():
                raise ParseError(f"{key} takes one integer", n, 1)
            header[key] = int(words[1])
            if key == "veering" and header[key] != FORMAT_VERSION:
                raise ParseError(f"unsupported format version {header[key]}", n, _column(raw, words[1]))
        elif key == "triangle":
            if len(words) != 4:
                raise ParseError("a triangle has three slots", n, 1)
            slots = []
            pos = 0
            for w in words[1:]:
                m = _SLOT.match(w)
                col = _column(raw, w, pos)
                pos = col
                if not m:
                    raise ParseError(f"bad slot {w!r}; expected label followed by + or -", n, col)
                slots.append((m.group(1), 1 if m.group(2) == "+" else -1))
            canon = min(tuple(slots[i:] + slots[:i]) for i in range(3))
            if canon in seen_tris:
                raise ParseError(f"duplicate triangle (same as line {seen_tris[canon]})", n, 1)
            seen_tris[canon] = n
            triangles.append(tuple(slots))
            tri_lines.append(n)
        elif key == "colours":
            if colours is not None:
                raise ParseError("repeated colours line", n, 1)
            colours, colour_line = {}, n
            for w in words[1:]:
                label, _, c = w.partition("=")
                if c not in ("R", "B") or not label:
                    raise ParseError(f"bad colour {w!r}; expected label=R or label=B", n, _column(raw, w))
                if label in colours:
                    raise ParseError(f"label {label} coloured twice", n, _column(raw, w))
                colours[label] = Colour(c)
        elif key == "geometry":
            vectors = {}
        else:
            raise ParseError(f"unknown line type {key!r}", n, 1)
    for key in ("veering", "genus", "marked"):
        if key not in header:
            raise ParseError(f"missing {key} line")
    if not triangles:
        raise ParseError("no triangles")
    if colours is None:
        raise ParseError("missing colours line")
    _check_labels(triangles, tri_lines, colours, colour_line)
    t = Triangulation(tuple(triangles), colours, header["genus"], header["marked"])
    report = t.validate()
    if not report.ok:
        raise InvariantError("; ".join(report.failures))
    if vectors is not None and set(vectors) != set(t.labels):
        raise ParseError(f"geometry covers {sorted(vectors)} but labels are {list(t.labels)}")
    return t, vectors


def _check_labels(triangles, tri_lines, colours, colour_line):
    count = {}
    for tri, n in zip(triangles, tri_lines):
        for label, _ in tri:
            count[label] = count.get(label, 0) + 1
            if count[label] > 2:
                raise InvariantError(f"label {label} occurs more than twice", n, 1)
    for label, k in count.items():
        if k == 1:
            n = next(n for tri, n in zip(triangles, tri_lines) if any(s[0] == label for s in tri))
            raise InvariantError(f"label {label} occurs once", n, 1)
    missing = sorted(set(count) - set(colours), key=label_key)
    extra = sorted(set(colours) - set(count), key=label_key)
    if missing or extra:
        raise InvariantError(f"colours missing {missing}, unknown {extra}", colour_line, 1)


def to_json(t, vectors=None):
    doc = {
        "format": FORMAT_VERSION,
        "genus": t.genus,
        "marked": t.marked,
        "triangles": [[f"{s.label}{'+' if s.sign > 0 else '-'}" for s in tri] for tri in t.triangles],
        "colours": {l: t.colour(l).value for l in t.labels},
    }
    if vectors:
        doc["geometry"] = {l: [_num(vectors[l][0]), _num(vectors[l][1])] for l in t.labels}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def from_json(text):
    """Parse the JSON mirror by rewriting it as text, so both share validation."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    try:
        lines = [f"veering {doc['format']}", f"genus {doc['genus']}", f"marked {doc['marked']}"]
        lines += ["triangle " + " ".join(tri) for tri in doc["triangles"]]
        lines.append("colours " + " ".join(f"{k}={v}" for k, v in doc["colours"].items()))
        if "geometry" in doc:
            lines.append("geometry")
            lines += [f"{k} {v[0]} {v[1]}" for k, v in doc["geometry"].items()]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing or malformed field {exc}") from exc
    return parse("\n".join(lines))


def load(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return from_json(text) if str(path).endswith(".json") else parse(text)


def state_of(t, vectors):
    return SurfaceState(t, dict(vectors)) if vectors else None
