"""Thin HTTP client for the reconstruction service.

Without a base URL the client runs the service in-process (same request and
response schemas, no socket); with one it talks to a remote server over
httpx.  Experiment calls return the JSON payloads the result writers consume.
"""

from __future__ import annotations

import httpx

from .errors import SfrecError


class ServiceError(SfrecError):
    """Non-success response from the service."""

    def __init__(self, status_code: int, detail):
        super().__init__(f"service returned {status_code}: {detail}")
        self.status_code = status_code
        self.detail = detail


class ServiceClient:
    def __init__(self, base_url: str | None = None, timeout: float | None = None):
        if base_url is None:
            from fastapi.testclient import TestClient

            from .service.app import app
            self._client = TestClient(app)
        else:
            self._client = httpx.Client(base_url=base_url, timeout=timeout)

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _request(self, method: str, path: str, json=None) -> dict:
        response = self._client.request(method, path, json=json)
        try:
            body = response.json()
        except ValueError:
            body = {"detail": response.text}
        if response.status_code >= 300:
            raise ServiceError(response.status_code, body)
        return body

    def health(self) -> dict:
        return self._request("GET", "/health")

    def monopole_1d(self, config: dict) -> dict:
        return self._request("POST", "/experiments/monopole-1d", json=config)

    def monopole_plane_2d(self, config: dict) -> dict:
        return self._request("POST", "/experiments/monopole-plane-2d", json=config)

    def dataset_2d(self, config: dict, dataset: dict | None = None) -> dict:
        return self._request("POST", "/experiments/dataset-2d",
                             json={"config": config, "dataset": dataset})

    def synthesize_dataset(self, config: dict) -> dict:
        return self._request("POST", "/datasets/synthesize", json={"config": config})

    def check_dataset(self, dataset: dict) -> dict:
        return self._request("POST", "/datasets/check", json=dataset)
