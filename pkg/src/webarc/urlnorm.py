"""Seed-URL normalization.

The normalized URL is the identity of a seed: dedup inside groups, merge
collisions and federated-search dedup all compare these strings.
"""

from __future__ import annotations

import re
from urllib.parse import urlsplit, urlunsplit

from .errors import InvalidUrl

_DEFAULT_PORTS = {"http": 80, "https": 443}
_PCT_RE = re.compile(r"%[0-9a-fA-F]{2}")


def _remove_dot_segments(path: str) -> str:
    # RFC 3986 section 5.2.4
    output: list[str] = []
    while path:
        if path.startswith("../"):
            path = path[3:]
        elif path.startswith("./"):
            path = path[2:]
        elif path.startswith("/./"):
            path = "/" + path[3:]
        elif path == "/.":
            path = "/"
        elif path.startswith("/../"):
            path = "/" + path[4:]
            if output:
                output.pop()
        elif path == "/..":
            path = "/"
            if output:
                output.pop()
        elif path in (".", ".."):
            path = ""
        else:
            cut = path.find("/", 1)
            if cut == -1:
                output.append(path)
                path = ""
            else:
                output.append(path[:cut])
                path = path[cut:]
    return "".join(output)


def normalize_url(raw: str) -> str:
    """Canonicalize an absolute http(s) URL.

    Lowercases scheme and host, strips default ports, resolves dot-segments,
    drops the fragment, uppercases percent-escapes in the path, and leaves
    the query string untouched (archived seeds are often query-differentiated).
    Idempotent. Raises :class:`InvalidUrl` for anything that is not an
    absolute http(s) URL.
    """
    if not isinstance(raw, str) or not raw.strip():
        raise InvalidUrl(f"not an absolute http(s) URL: {raw!r}")
    try:
        parts = urlsplit(raw.strip())
    except ValueError as exc:
        raise InvalidUrl(str(exc)) from exc
    scheme = parts.scheme.lower()
    if scheme not in ("http", "https") or not parts.hostname:
        raise InvalidUrl(f"not an absolute http(s) URL: {raw!r}")

    host = parts.hostname.lower()
    port = parts.port
    netloc = host if port is None or port == _DEFAULT_PORTS[scheme] else f"{host}:{port}"
    if parts.username:
        cred = parts.username if parts.password is None else f"{parts.username}:{parts.password}"
        netloc = f"{cred}@{netloc}"

    path = _remove_dot_segments(parts.path) or "/"
    path = _PCT_RE.sub(lambda m: m.group(0).upper(), path)
    return urlunsplit((scheme, netloc, path, parts.query, ""))


def normalize_tag(raw: str) -> str:
    """Trim, lower-case, and collapse internal whitespace. Idempotent."""
    return " ".join(raw.strip().lower().split())
