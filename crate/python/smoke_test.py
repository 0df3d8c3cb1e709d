"""Smoke test for the `ecv` Python module.

Build and install first:
    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/ecv-*.whl
then run `python python/smoke_test.py` from the repository root.
"""

import json
import pathlib
import sys
import tempfile

import ecv

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "crates" / "core" / "tests" / "fixtures"


def main() -> int:
    assert ecv.determine_exposed("provider") == (True, "ImplicitProviderDefault")
    assert ecv.determine_exposed("receiver", has_intent_filter=True) == (True, "ImplicitIntentFilter")
    assert ecv.determine_exposed("service", exported=True, permission="android.permission.SEND_SMS") == (
        False,
        "ProtectedByStrongPermission",
    )
    assert ecv.determine_exposed("activity", enabled=False, exported=True) == (False, "Disabled")

    exposure = json.loads(ecv.manifest([str(FIXTURES / "corpus")]))
    assert exposure["total"]["all"] == 9, exposure["total"]

    with tempfile.TemporaryDirectory() as tmp:
        result = json.loads(ecv.analyze([str(FIXTURES / "corpus")], out_dir=tmp, jobs=2))
        totals = result["report"]["totals"]
        assert totals["potential"] == 4, totals
        assert totals["demoted"] == 1, totals
        assert (pathlib.Path(tmp) / "findings.jsonl").is_file()

        jsonl = (pathlib.Path(tmp) / "findings.jsonl").read_text()
        refiltered = [json.loads(l) for l in ecv.filter_findings(jsonl, "x|VS_Input|.*|everything\n").splitlines()]
        demoted = [f for f in refiltered if f["verdict"] == "FilteredFalsePositive"]
        assert {f["category"] for f in demoted} == {"VS_Input"}, demoted

        written = ecv.build_datasets(str(pathlib.Path(tmp) / "ds"))
        assert len(written) == 3

    try:
        ecv.determine_exposed("gadget")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown kind accepted")

    print(f"ecv {ecv.__version__}: smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
