"""Smoke test for the evoforge Python module.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/evoforge-*.whl
"""

import json
import math
import pathlib
import sys
import tempfile

import evoforge

ROOT = pathlib.Path(__file__).resolve().parent.parent
IMAGE = ROOT / "crates/core/assets/library/img_00.png"
ROTATION = "param angle\nstep rotate $angle\nargs angle=15\nargs angle=45\nargs angle=90\nargs angle=180"


def check_language():
    canon = evoforge.canonicalize(ROTATION.replace(" ", "   "))
    assert canon == evoforge.canonicalize(canon)
    assert evoforge.tokenize(canon)[:2] == ["param", "angle"]
    try:
        evoforge.canonicalize("step spin 3")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown op accepted")


def check_images():
    png = IMAGE.read_bytes()
    out = evoforge.run_program(ROTATION, png, 2)
    assert out[:8] == b"\x89PNG\r\n\x1a\n"
    h = evoforge.dhash(out)
    assert evoforge.dhash_similarity(h, h) == 1.0
    t0, t1 = (json.loads(t) for t in evoforge.synthesize(ROTATION, png, 3))
    assert t0["kind"] != t1["kind"]
    assert sorted(t0["permutation"]) == [0, 1, 2, 3]


def check_rewards():
    assert [round(evoforge.difficulty_reward(k / 6), 12) for k in range(7)] == [round(x, 12) for x in (0, 1 / 3, 2 / 3, 1, 2 / 3, 1 / 3, 0)]
    assert math.isclose(evoforge.challenger_total(1, 1, 1, -1), 0.7, abs_tol=1e-12)
    adv = evoforge.group_advantages([0.0, 1.0, 0.5, 0.25])
    assert abs(sum(adv)) < 1e-9
    assert evoforge.kl_low_var(-1.0, -1.0) == 0.0
    assert math.isclose(evoforge.clipped_term(1.5, 1.0, 0.28, 0.2), 1.2)
    assert evoforge.bleu_similarity(ROTATION, ROTATION) == 1.0


def check_queue():
    q = evoforge.ExampleQueue()
    assert len(q) == 4
    assert q.insert(ROTATION, 0.5) == "duplicate"
    assert q.insert("param n\nstep pixelate $n\nargs n=4\nargs n=8\nargs n=12\nargs n=16", 0.5) in ("accepted", "duplicate")
    assert q.snapshot().count("\n") >= len(q)


def check_run():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = json.loads((ROOT / "configs/desk.json").read_text())
        cfg.update(iterations=1, steps=2, run_dir=str(pathlib.Path(tmp) / "run"))
        report = json.loads(evoforge.evolve(json.dumps(cfg)))
        assert len(report["iterations"]) == 1
        diversity, failures = evoforge.analyze(cfg["run_dir"])
        assert len(diversity) == 1 and failures == 0


def main():
    for check in (check_language, check_images, check_rewards, check_queue, check_run):
        check()
        print(f"ok {check.__name__}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
