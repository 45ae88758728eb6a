import pytest
from fastapi.testclient import TestClient

from tailcouple import __version__
from tailcouple.main import app
from tests.conftest import quantile_grid


@pytest.fixture
def client():
    with TestClient(app) as c:
        yield c


@pytest.fixture
def grid_values():
    return [float(v) for v in quantile_grid(0.6, 2_000).values]


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "version": __version__, "seed": 0}


def test_estimate(client, grid_values):
    resp = client.post("/estimate", json={"values": grid_values, "measure1": "pht:rho=1.2"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["schema"] == 1
    assert body["source"] == "request"
    assert body["n"] == 2_000
    assert body["measure1"]["label"] == "pht:rho=1.2"
    assert "lambda" in body["coupled"]
    assert body["coupled"]["notes"]


def test_estimate_coupled_ratio(client, grid_values):
    resp = client.post(
        "/estimate",
        json={"values": grid_values, "measure1": "cte:t=0.9", "measure2": "mean", "coupling": "ratio", "k": "40"},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["k"] == 40
    assert body["coupled"]["point"] == pytest.approx(body["measure1"]["total"] / body["measure2"]["total"])


def test_negative_value(client):
    resp = client.post("/estimate", json={"values": [1.0, -2.0, 3.0, 4.0]})
    assert resp.status_code == 422
    assert resp.json() == {"error": "NegativeValue", "detail": "negative value at index 1", "exit_code": 2}


def test_divergence(client, grid_values):
    resp = client.post("/estimate", json={"values": grid_values, "measure1": "pht:rho=2"})
    assert resp.status_code == 422
    assert resp.json()["error"] == "TailDivergence"
    assert resp.json()["exit_code"] == 3


def test_request_validation(client, grid_values):
    resp = client.post("/estimate", json={"values": grid_values, "alpha": 2.0})
    assert resp.status_code == 422
    assert "detail" in resp.json()


def test_scan(client, grid_values):
    resp = client.post("/scan-k", json={"values": grid_values, "k_from": 10, "k_to": 20})
    assert resp.status_code == 200
    rows = resp.json()["rows"]
    assert [r["k"] for r in rows] == list(range(10, 21))


def test_simulate(client):
    payload = {"model": "pareto:gamma=0.6", "n": 500, "reps": 50, "seed": 1}
    first = client.post("/simulate", json=payload).json()
    second = client.post("/simulate", json=payload).json()
    assert first == second
    assert first["replicates"] == 50
    assert first["model"] == "pareto:gamma=0.6"


def test_bridge_check(client):
    resp = client.post("/bridge-check", json={"gamma": 0.6, "grid_size": 10_000, "reps": 1_000, "seed": 2})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["rows"]) == 6
    assert body["seed"] == 2
