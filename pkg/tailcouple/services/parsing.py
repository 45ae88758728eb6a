from typing import Dict, Tuple

from tailcouple.errors import SpecStringError


def parse_spec_string(text: str) -> Tuple[str, Dict[str, str]]:
    """
    Split a spec string such as ``"pht:rho=1.2"`` or ``"burr:lam=2,tau=1"``
    into its lower-cased name and a ``{key: raw value}`` dict.
    A positional value (``"fraction:0.1"``) is stored under the key ``""``.
    """
    if not isinstance(text, str) or not text.strip():
        raise SpecStringError("empty spec string")
    name, _, rest = text.strip().partition(":")
    params: Dict[str, str] = {}
    for item in filter(None, (part.strip() for part in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            key, value = "", key
        key = key.strip().lower()
        if key in params:
            raise SpecStringError(f"duplicate parameter {key!r} in {text!r}")
        params[key] = value.strip()
    return name.strip().lower(), params


def float_param(params: Dict[str, str], key: str, text: str) -> float:
    if key not in params:
        raise SpecStringError(f"missing parameter {key!r} in {text!r}")
    try:
        return float(params[key])
    except ValueError:
        raise SpecStringError(f"parameter {key!r} in {text!r} is not a number") from None


def reject_unknown(params: Dict[str, str], allowed: Tuple[str, ...], text: str) -> None:
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise SpecStringError(f"unknown parameter(s) {unknown} in {text!r}")
