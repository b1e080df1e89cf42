"""Decide a few small configurations and glue strip complexes for them.

Run ``python demos/configurations.py [outdir]``. For each configuration the
script prints the verdict, the certificate or the obstruction, and the strip
complex read back from the gluing. SVG drawings of the complexes go to
``outdir`` (default ``demo_out``).
"""

import sys
from pathlib import Path

from foliagraph.graph_core import OPEN_END, EulerianCertificate, make_config, solve_global, verdict
from foliagraph.surface_synth import extract_configuration, isomorphic, render_svg, synthesize

CONFIGS = {
    # one vertex with a three-way branching, micrograph a path
    "branch": make_config(["s"], {"L0": [OPEN_END, "s"], "L1": ["s", OPEN_END], "L2": ["s", OPEN_END]},
                          {"s": {"F0": ["L0", "L1"], "F1": ["L0", "L2"]}}),
    # the three-pronged pattern, micrograph a triangle
    "triangle": make_config(["s"], {"L1": ["s", OPEN_END], "L2": ["s", OPEN_END], "L3": [OPEN_END, "s"]},
                            {"s": {"a": ["L1", "L2"], "b": ["L2", "L3"], "c": ["L3", "L1"]}}),
    # two vertices joined twice; locally fine but every orientation has a cycle
    "monochrome": make_config(["a", "b"], {"L1": ["a", "b"], "L2": ["a", "b"]},
                              {"a": {"m": ["L1", "L2"]}, "b": {"n": ["L1", "L2"]}}),
}


def main(outdir="demo_out"):
    out = Path(outdir)
    out.mkdir(exist_ok=True)
    for name, config in CONFIGS.items():
        result = solve_global(config)
        print(f"{name}: {verdict(config, result)}")
        if isinstance(result, EulerianCertificate):
            for eid, (tail, head) in sorted(result.orientation.items()):
                print(f"  {eid}: {tail} -> {head}")
            print("  levels:", {v: str(a) for v, a in result.levels.items()})
            orientation = result.orientation
        else:
            print(f"  obstruction {result.to_dict()}")
            orientation = {e.id: e.ends for e in config.edges}
        cx = synthesize(config, orientation)
        flips = [i.micro for i in cx.identifications if i.flip]
        back = extract_configuration(cx)
        print(f"  strips {len(cx.strips)}, flipped gluings {flips or 'none'}, "
              f"round trip isomorphic: {isomorphic(back, config)}")
        (out / f"{name}.svg").write_text(render_svg(cx))
    print(f"drawings written to {out}/")


if __name__ == "__main__":
    main(*sys.argv[1:])
