"""Tests for FastAPI application factory."""

from __future__ import annotations

from fastapi.testclient import TestClient

from wavemaps_gibbs.app import create_app


def test_health_endpoint() -> None:
    client = TestClient(create_app())
    response = client.get("/api/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_metadata_endpoint() -> None:
    client = TestClient(create_app())
    response = client.get("/api/metadata")
    assert response.status_code == 200
    payload = response.json()
    assert payload["service"] == "Wavemaps Gibbs Lab"
    assert payload["version"] == "0.1.0"


def test_soliton_endpoint_for_the_flat_branch() -> None:
    client = TestClient(create_app())
    response = client.get("/api/soliton", params={"n": 0, "k": 1, "R": 5.0, "M": 40})
    assert response.status_code == 200
    payload = response.json()
    assert payload["n"] == 0
    assert payload["k"] == 1
    assert payload["decay_slope"] is None


def test_greens_endpoint() -> None:
    client = TestClient(create_app())
    response = client.get("/api/greens", params={"n": 0, "k": 1, "R": 5.0, "M": 40})
    assert response.status_code == 200
    payload = response.json()
    assert payload["params"]["M"] == 40
    assert payload["symmetry_defect"] <= 1e-10
    assert payload["smallest_eigenvalue"] > 0.0


def test_measure_diagnostics_endpoint() -> None:
    client = TestClient(create_app())
    response = client.get(
        "/api/measures/diagnostics", params={"n": 0, "k": 1, "R": 5.0, "M": 40, "samples": 50, "seed": 3}
    )
    assert response.status_code == 200
    payload = response.json()
    assert payload["samples"] == 50
    assert payload["seed"] == 3
    assert set(payload["growth"]) == {"q10", "q50", "q90"}


def test_inadmissible_parameters_are_rejected() -> None:
    client = TestClient(create_app())
    assert client.get("/api/greens", params={"n": 1, "k": 0}).status_code == 422
    assert client.get("/api/greens", params={"M": 1}).status_code == 422
