"""
HTTP transport for forge clients: live requests, recording and replay.

Recorded interactions are JSON files named by a digest of method, URL and query
parameters. A recording holds a list of responses served in order; once exhausted the
last one repeats, which lets tests script rate-limit waits and retries.
"""

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import requests

from .errors import AuthFailure, NetworkError, RateLimitExhausted

logger = logging.getLogger(__name__)


@dataclass
class HttpResponse:
    status: int
    headers: Dict[str, str] = field(default_factory=dict)
    body: Any = None

    def header(self, name: str) -> Optional[str]:
        lowered = name.lower()
        for key, value in self.headers.items():
            if key.lower() == lowered:
                return value
        return None


def recording_key(method: str, url: str, params: Optional[Dict[str, Any]] = None) -> str:
    canonical = json.dumps(
        {"method": method.upper(), "url": url, "params": {k: str(v) for k, v in (params or {}).items()}},
        sort_keys=True,
    )
    return hashlib.sha1(canonical.encode("utf-8")).hexdigest()


def write_recording(
    directory: Path,
    url: str,
    responses: List[HttpResponse],
    params: Optional[Dict[str, Any]] = None,
    method: str = "GET",
) -> Path:
    """Store a scripted interaction for ReplayTransport."""
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{recording_key(method, url, params)}.json"
    payload = {
        "method": method.upper(),
        "url": url,
        "params": {k: str(v) for k, v in (params or {}).items()},
        "responses": [
            {"status": r.status, "headers": r.headers, "body": r.body} for r in responses
        ],
    }
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


class Transport:
    def get(
        self, url: str, params: Optional[Dict[str, Any]] = None, headers: Optional[Dict[str, str]] = None
    ) -> HttpResponse:
        raise NotImplementedError


class LiveTransport(Transport):
    """requests-backed transport; optionally records every response."""

    def __init__(self, record_dir: Optional[Path] = None, timeout: float = 30.0):
        self.session = requests.Session()
        self.record_dir = Path(record_dir) if record_dir else None
        self.timeout = timeout

    def get(self, url, params=None, headers=None) -> HttpResponse:
        try:
            response = self.session.get(url, params=params, headers=headers, timeout=self.timeout)
        except requests.RequestException as e:
            raise NetworkError(f"GET {url} failed: {e}", url=url) from e
        try:
            body = response.json()
        except ValueError:
            body = response.text
        result = HttpResponse(response.status_code, dict(response.headers), body)
        if self.record_dir is not None:
            write_recording(self.record_dir, url, [result], params)
        return result


class ReplayTransport(Transport):
    """Serves recorded responses from disk; a missing recording is a NetworkError."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self._served: Dict[str, int] = {}
        self._lock = threading.Lock()

    def get(self, url, params=None, headers=None) -> HttpResponse:
        key = recording_key("GET", url, params)
        path = self.directory / f"{key}.json"
        if not path.exists():
            raise NetworkError(f"No recorded response for GET {url} {params or {}}", url=url)
        responses = json.loads(path.read_text(encoding="utf-8"))["responses"]
        with self._lock:
            index = self._served.get(key, 0)
            self._served[key] = index + 1
        item = responses[min(index, len(responses) - 1)]
        return HttpResponse(item["status"], item.get("headers", {}), item.get("body"))


class ForgeClient:
    """Shared request policy: authentication, rate-limit waits and bounded retries."""

    def __init__(
        self,
        transport: Transport,
        headers: Optional[Dict[str, str]] = None,
        max_retries: int = 5,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.time,
        max_wait: float = 3600.0,
    ):
        self.transport = transport
        self.headers = headers or {}
        self.max_retries = max_retries
        self.sleep = sleep
        self.clock = clock
        self.max_wait = max_wait

    def _rate_limited(self, response: HttpResponse) -> bool:
        if response.status == 429:
            return True
        return response.status == 403 and response.header("X-RateLimit-Remaining") == "0"

    def _wait_time(self, response: HttpResponse, attempt: int) -> float:
        retry_after = response.header("Retry-After")
        if retry_after is not None:
            return min(float(retry_after), self.max_wait)
        reset = response.header("X-RateLimit-Reset")
        if reset is not None:
            return min(max(float(reset) - self.clock(), 0.0), self.max_wait)
        return float(2**attempt)

    def get(self, url: str, params: Optional[Dict[str, Any]] = None) -> HttpResponse:
        last_status = None
        for attempt in range(self.max_retries + 1):
            response = self.transport.get(url, params=params, headers=self.headers)
            last_status = response.status
            if response.status == 401:
                raise AuthFailure(f"Authentication rejected by {url}", url=url)
            if self._rate_limited(response):
                if attempt == self.max_retries:
                    break
                wait = self._wait_time(response, attempt)
                logger.warning(f"Rate limit hit on {url}, waiting {wait:.0f}s")
                self.sleep(wait)
                continue
            if response.status >= 500:
                if attempt == self.max_retries:
                    raise NetworkError(f"GET {url} failed with {response.status}", url=url)
                self.sleep(float(2**attempt))
                continue
            if response.status >= 400:
                raise NetworkError(f"GET {url} failed with {response.status}", url=url)
            return response
        raise RateLimitExhausted(
            f"Rate limit still exhausted after {self.max_retries} retries ({last_status})", url=url
        )
