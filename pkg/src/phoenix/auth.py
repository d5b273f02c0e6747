"""Bearer-token verification (HS256 JWT) and the local test issuer.

Identity federation is out of scope; any configured issuer's signed
tokens are accepted, and the repo ships a local issuer for development
and hermetic tests. PyJWT is not available on the package mirror, so the
HS256 subset is implemented directly on hmac/hashlib; the algorithm is
pinned and nothing else is accepted.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Set


class TokenError(ValueError):
    """Verification failure; code is one of missing / expired /
    invalid_signature."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class UserAccount:
    user_id: str
    display_name: str
    token_fingerprints: Set[str] = field(default_factory=set)
    created: float = 0.0


def _b64url_encode(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def _b64url_decode(text: str) -> bytes:
    padding = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + padding)


def sign_token(claims: dict, key: str) -> str:
    header = {"alg": "HS256", "typ": "JWT"}
    signing_input = (_b64url_encode(json.dumps(header, sort_keys=True,
                                               separators=(",", ":")).encode())
                     + "."
                     + _b64url_encode(json.dumps(claims, sort_keys=True,
                                                 separators=(",", ":")).encode()))
    digest = hmac.new(key.encode("utf-8"), signing_input.encode("ascii"),
                      hashlib.sha256).digest()
    return signing_input + "." + _b64url_encode(digest)


def verify_token(token: Optional[str], issuer_keys: Dict[str, str],
                 now: Optional[float] = None) -> dict:
    """Verify signature, issuer and expiry; returns the claims."""
    if not token:
        raise TokenError("missing", "no bearer token supplied")
    now = time.time() if now is None else now
    parts = token.split(".")
    if len(parts) != 3:
        raise TokenError("invalid_signature", "token is not a JWT")
    try:
        header = json.loads(_b64url_decode(parts[0]))
        claims = json.loads(_b64url_decode(parts[1]))
        signature = _b64url_decode(parts[2])
    except Exception:
        raise TokenError("invalid_signature", "token is not decodable") from None
    if not isinstance(header, dict) or header.get("alg") != "HS256":
        raise TokenError("invalid_signature", "unsupported algorithm")
    if not isinstance(claims, dict):
        raise TokenError("invalid_signature", "claims must be an object")
    issuer = claims.get("iss")
    key = issuer_keys.get(issuer)
    if key is None:
        raise TokenError("invalid_signature", f"unknown issuer {issuer!r}")
    signing_input = (parts[0] + "." + parts[1]).encode("ascii")
    expected = hmac.new(key.encode("utf-8"), signing_input,
                        hashlib.sha256).digest()
    if not hmac.compare_digest(signature, expected):
        raise TokenError("invalid_signature", "signature mismatch")
    exp = claims.get("exp")
    if not isinstance(exp, (int, float)):
        raise TokenError("invalid_signature", "missing exp claim")
    if exp < now:
        raise TokenError("expired", "token has expired")
    if not isinstance(claims.get("sub"), str) or not claims["sub"]:
        raise TokenError("invalid_signature", "missing sub claim")
    return claims


def token_fingerprint(token: str) -> str:
    return hashlib.sha256(token.encode("ascii")).hexdigest()


@dataclass(frozen=True)
class TokenIssuer:
    """Signs tokens for one issuer name; the repo's test issuer."""

    issuer: str
    key: str

    def issue(self, user_id: str, display_name: str = "",
              expires_in: float = 3600.0,
              now: Optional[float] = None) -> str:
        now = time.time() if now is None else now
        claims = {"iss": self.issuer, "sub": user_id,
                  "name": display_name or user_id,
                  "iat": int(now), "exp": int(now + expires_in)}
        return sign_token(claims, self.key)


LOCAL_TEST_ISSUER = "phoenix-local"
LOCAL_TEST_KEY = "phoenix-local-development-key"


def local_test_issuer() -> TokenIssuer:
    """Development issuer; configure real TOKEN_ISSUER_KEYS in production."""
    return TokenIssuer(LOCAL_TEST_ISSUER, LOCAL_TEST_KEY)
