import threading

import pytest
import requests

from conftest import SHIM_PATH
from rewardengine.detectors import DetectorRegistry
from rewardengine.harness import ResourceLimits
from rewardengine.reward import RewardConfig
from rewardengine.service import RewardService, make_server
from rewardengine.tasks import TaskSpec, UnitTest


def make_task(task_id="t1"):
    return TaskSpec(
        task_id=task_id, prompt="p", mode="security", cwe_tags=(89,),
        unit_tests=(UnitTest("a", "", (), "ok\n"),),
    )


@pytest.fixture(scope="module")
def service_url():
    service = RewardService(
        tasks=[make_task("t1"), make_task("t2")],
        registry=DetectorRegistry(),
        limits=ResourceLimits(workers=1, shim_path=SHIM_PATH),
        config=RewardConfig(),
        workers=4,
        max_batch_items=8,
    )
    server = make_server("127.0.0.1", 0, service)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
    service.pool.shutdown(wait=True)


class TestHealth:
    def test_health_endpoint(self, service_url):
        response = requests.get(service_url + "/health", timeout=10)
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "ok"
        assert body["queue_depth"] == 0

    def test_unknown_path_404(self, service_url):
        assert requests.get(service_url + "/nope", timeout=10).status_code == 404
        assert requests.post(service_url + "/nope", json={}, timeout=10).status_code == 404


class TestScore:
    def test_batch_preserves_order_and_scores(self, service_url):
        items = [
            {"candidate_id": "good", "task_id": "t1", "source": "print('ok')\n"},
            {"candidate_id": "broken", "task_id": "t1", "source": "((("},
            {"candidate_id": "stranger", "task_id": "zzz", "source": ""},
        ]
        response = requests.post(service_url + "/score",
                                 json={"batch_id": "b1", "items": items},
                                 timeout=120)
        assert response.status_code == 200
        body = response.json()
        assert body["batch_id"] == "b1"
        rewards = body["rewards"]
        assert [r["candidate_id"] for r in rewards] == ["good", "broken", "stranger"]
        assert rewards[0]["r_hybrid"] == 1.0
        assert rewards[1]["r_hybrid"] == -1.0
        assert "unknown task_id" in rewards[2]["error"]
        assert "wall_ms" in body["timing"]

    def test_alpha_override(self, service_url):
        # clean candidate that fails the test: r_hybrid = alpha * 1 + (1-alpha) * 0
        items = [{"candidate_id": "c", "task_id": "t1",
                  "source": "print('wrong')\n"}]
        response = requests.post(
            service_url + "/score",
            json={"items": items, "alpha": 1.0}, timeout=120)
        reward = response.json()["rewards"][0]
        assert reward["r_function"] == 0.0
        assert reward["r_hybrid"] == 1.0

    def test_normalize_override(self, service_url):
        items = [
            {"candidate_id": "a", "task_id": "t1", "source": "print('ok')\n"},
            {"candidate_id": "b", "task_id": "t1", "source": "print('no')\n"},
        ]
        response = requests.post(service_url + "/score",
                                 json={"items": items, "normalize": True},
                                 timeout=120)
        rewards = response.json()["rewards"]
        assert rewards[0]["normalized"] > 0 > rewards[1]["normalized"]

    def test_oversized_batch_rejected(self, service_url):
        items = [{"candidate_id": str(i), "task_id": "t1", "source": ""}
                 for i in range(9)]
        response = requests.post(service_url + "/score",
                                 json={"items": items}, timeout=10)
        assert response.status_code == 400
        assert "exceeds limit" in response.json()["error"]

    def test_malformed_body_rejected(self, service_url):
        response = requests.post(service_url + "/score", data="{nope",
                                 timeout=10)
        assert response.status_code == 400

    def test_concurrent_batches_deterministic(self, service_url):
        items = [{"candidate_id": f"c{i}", "task_id": "t2",
                  "source": "print('ok')\n"} for i in range(4)]
        results = []

        def worker():
            response = requests.post(service_url + "/score",
                                     json={"items": items}, timeout=120)
            results.append([r["candidate_id"] for r in response.json()["rewards"]])

        threads = [threading.Thread(target=worker) for _ in range(3)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(order == [f"c{i}" for i in range(4)] for order in results)
