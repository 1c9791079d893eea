"""Live UI-loop check: the compiled browser client against the real service.

Skipped when the frontend has not been built (`npm run build` in frontend/).
"""
import json
import subprocess
from pathlib import Path

import pytest

from mpctuner.config import ExperimentConfig
from mpctuner.harness.teleop import TeleopServer

REPO = Path(__file__).resolve().parent.parent
FRONTEND = REPO / "frontend"


@pytest.mark.skipif(not (FRONTEND / "dist" / "main.js").exists(),
                    reason="frontend not built")
@pytest.mark.skipif(not (FRONTEND / "node_modules" / "ws").exists(),
                    reason="frontend dev dependencies not installed")
def test_ui_loop_against_live_server():
    server = TeleopServer(ExperimentConfig(), port=0)
    server.start()
    try:
        proc = subprocess.run(
            ["node", str(FRONTEND / "test" / "live_client.mjs"),
             f"ws://{server.host}:{server.port}"],
            capture_output=True, text=True, timeout=60)
    finally:
        server.stop()
    assert proc.returncode == 0, proc.stderr + proc.stdout
    verdict = json.loads(proc.stdout.strip().splitlines()[-1])
    assert verdict["connected"]
    assert verdict["moved_within_ticks"] <= 2
    assert verdict["metrics_keys_ok"]
    assert verdict["error_banner_seen"]
    assert verdict["survived_malformed"]
    print(f"\nACCEPTANCE PASS: UI loop (motion after {verdict['moved_within_ticks']} "
          f"tick(s), metrics displayed, malformed frames survived)")
