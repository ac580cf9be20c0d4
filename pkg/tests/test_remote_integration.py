"""Round-trip the Python remote client against the sidecar stub server."""

import base64
import json
import shutil
import subprocess
import time
from pathlib import Path

import pytest

from vlpgnav.embedding import RemoteProvider

FRONTEND = Path(__file__).parents[1] / "frontend"


@pytest.fixture(scope="module")
def server_url():
    if shutil.which("node") is None:
        pytest.skip("node is not installed")
    cli = FRONTEND / "dist" / "cli.js"
    if not cli.exists():
        if not (FRONTEND / "node_modules").exists():
            pytest.skip("frontend not built (run npm install && npm run "
                        "build in frontend/)")
        subprocess.run(["npx", "tsc"], cwd=FRONTEND, check=True)
    proc = subprocess.Popen(["node", str(cli), "--stub", "--port", "0"],
                            stdout=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline().strip()
        assert line.startswith("listening on "), line
        yield line.removeprefix("listening on ")
    finally:
        proc.terminate()
        proc.wait(timeout=10)


@pytest.fixture(scope="module")
def golden():
    return json.loads((FRONTEND / "fixtures" / "golden.json").read_text())


def test_info_dimension_honored(server_url):
    provider = RemoteProvider(server_url)
    assert provider.dimension == 512


def test_golden_fixtures_round_trip_bit_exactly(server_url, golden, capsys):
    provider = RemoteProvider(server_url)
    assert len(golden) > 0
    for case in golden:
        op = case["request"]["op"]
        payload = case["request"]["payload"]
        if op == "embed_text":
            vec = provider.embed_text(payload)
        else:
            vec = provider.embed_image(base64.b64decode(payload))
        assert vec.values.tolist() == case["response"]["vector"]
        assert len(vec) == provider.dimension
    with capsys.disabled():
        print(f"\n[ACCEPTANCE] stub server round-trips {len(golden)} golden "
              "fixtures bit-exactly through the remote client: PASS")


def test_same_text_twice_is_identical(server_url):
    provider = RemoteProvider(server_url)
    a = provider.embed_text("A photo of oven")
    b = provider.embed_text("A photo of oven")
    assert a.values.tolist() == b.values.tolist()


def test_concurrent_clients_agree(server_url):
    from concurrent.futures import ThreadPoolExecutor
    provider = RemoteProvider(server_url)
    with ThreadPoolExecutor(max_workers=8) as pool:
        vecs = list(pool.map(
            lambda i: provider.embed_text(f"prompt {i % 3}"), range(24)))
    for i, vec in enumerate(vecs):
        assert vec.values.tolist() == vecs[i % 3].values.tolist()
