"""Client for a remote semantic-search service."""

from __future__ import annotations

import requests

from .errors import RetrieverTransportError
from .retrieval import RankedList

DEFAULT_TIMEOUT = 10.0


class RemoteRetriever:
    """HTTP client speaking the retrieval wire format.

    Request: POST {endpoint} with JSON body {"query": str, "k": int}.
    Response: JSON {"results": [{"doc_id": str, "score": number}, ...]}.

    Transport failures (timeouts, non-2xx statuses, malformed bodies) raise
    RetrieverTransportError; an empty result list is a valid empty ranking.
    A session may be shared across threads for concurrent in-flight requests.
    """

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT,
                 session: requests.Session | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self._session = session or requests.Session()

    def retrieve(self, query: str, k: int = 5) -> RankedList:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        try:
            response = self._session.post(
                self.endpoint, json={"query": query, "k": k}, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise RetrieverTransportError(f"request to {self.endpoint} failed: {exc}") from exc
        if not 200 <= response.status_code < 300:
            raise RetrieverTransportError(
                f"{self.endpoint} returned status {response.status_code}"
            )
        try:
            body = response.json()
            results = body["results"]
            entries = [(str(item["doc_id"]), float(item["score"])) for item in results]
        except (ValueError, KeyError, TypeError) as exc:
            raise RetrieverTransportError(
                f"malformed response from {self.endpoint}: {exc}"
            ) from exc
        # The service is not trusted to sort or deduplicate.
        return RankedList.normalized(query, entries, k=k)
