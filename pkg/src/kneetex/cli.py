"""Command-line entry point: ``kneetex <command> ...``.

Exit codes: 0 success, 1 user/input error, 2 internal error.
"""
from __future__ import annotations

import argparse
import base64
import csv
import io
import itertools
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .dataset import (FULL_MASK, FeatureMatrix, format_float, mask_features, mask_hex,
                      mask_indices, parse_mask, read_features_csv, write_features_csv)
from .errors import KneeTexError, ParseError
from .evaluation import CvSpec, cv_auc, oof_scores, project_2d, roc_curve
from .geometry import (build_layout, canonical_view, layout_corners)
from .imageio import read_image
from .landmarks import load_landmarks
from .search import SubsetResult, best_per_cardinality, resolve_threads, search_all
from .stats import screen_features, table_grid
from .svm import fit_standardized, signed_labels
from .synth import CohortSpec, fbm_patch, write_synthetic_cohort
from .texture import FEATURE_NAMES, entropy, feature_vector, hurst

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UsageError(KneeTexError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _header(command: str, **config) -> List[str]:
    lines = [f"kneetex {__version__}", f"command: {command}"]
    lines += [f"{k}: {v}" for k, v in config.items()]
    return lines


def _write_header(fh, lines: Sequence[str]):
    for line in lines:
        fh.write(f"# {line}\n")


def _open_out(path):
    if path in (None, "-"):
        return _NoClose(sys.stdout)
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return open(path, "w", newline="")


class _NoClose:
    def __init__(self, fh):
        self.fh = fh

    def __enter__(self):
        return self.fh

    def __exit__(self, *exc):
        self.fh.flush()


def _cv_spec(args) -> CvSpec:
    return CvSpec(folds=args.folds, repeats=args.repeats, base_seed=args.seed)


def _load_matrix(path) -> FeatureMatrix:
    if not os.path.exists(path):
        raise ParseError(f"{path}: no such file")
    return read_features_csv(path)


# -- layout -----------------------------------------------------------------

def _pick_subject(landmarks, subject: Optional[str]):
    if subject is None:
        if len(landmarks) != 1:
            raise UsageError(f"landmark file holds {len(landmarks)} subjects; pick one with --subject")
        return landmarks[0]
    for lm in landmarks:
        if lm.subject_id == subject:
            return lm
    raise UsageError(f"subject {subject!r} not in landmark file")


def _svg_overlay(image: np.ndarray, corners_by_roi, scale: float) -> str:
    from PIL import Image

    img = image.astype(float)
    lo, hi = np.percentile(img, [1, 99])
    img8 = np.clip((img - lo) / max(hi - lo, 1) * 255, 0, 255).astype(np.uint8)
    h, w = img8.shape
    small = Image.fromarray(img8).resize((max(1, int(w * scale)), max(1, int(h * scale))))
    buf = io.BytesIO()
    small.save(buf, format="PNG")
    href = "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode()
    sw, sh = small.size
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" '
             f'width="{sw}" height="{sh}">',
             f'<image width="{sw}" height="{sh}" xlink:href="{href}"/>']
    for name, pts in corners_by_roi.items():
        pts_s = " ".join(f"{x * scale:.2f},{y * scale:.2f}" for x, y in pts)
        color = "#e4572e" if name.startswith("F") else "#17bebb"
        parts.append(f'<polygon points="{pts_s}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        x, y = pts[0]
        parts.append(f'<text x="{x * scale + 2:.1f}" y="{y * scale + 12:.1f}" fill="{color}" '
                     f'font-size="11">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def cmd_layout(args) -> int:
    lm = _pick_subject(load_landmarks(args.landmarks), args.subject)
    image = None
    image_path = args.image
    if image_path is None and lm.image and (args.overlay or lm.laterality == "right"):
        image_path = os.path.join(os.path.dirname(os.path.abspath(args.landmarks)), lm.image)
    if image_path is not None:
        image = read_image(image_path)
    if lm.laterality == "right" and image is None:
        raise UsageError("right knees need --image to map the layout back to image coordinates")
    if image is not None:
        _, canon = canonical_view(image, lm)
    else:
        canon = lm
    layout = build_layout(canon)
    rows = layout_corners(layout)
    if lm.laterality == "right":
        width = image.shape[1]
        rows = [(r, k, (width - 1) - x, y) for r, k, x, y in rows]
    with _open_out(args.out) as fh:
        _write_header(fh, _header("layout", subject=lm.subject_id, laterality=lm.laterality,
                                  out_of_bone=",".join(layout.warnings) or "none"))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["roi", "corner_index", "x", "y"])
        for r, k, x, y in rows:
            w.writerow([r, k, repr(float(x)), repr(float(y))])
    if args.overlay:
        if image is None:
            raise UsageError("--overlay needs an image")
        corners = {}
        for r, k, x, y in rows:
            corners.setdefault(r, []).append((x, y))
        with open(args.overlay, "w") as fh:
            fh.write(_svg_overlay(image, corners, args.overlay_scale))
    for name in layout.warnings:
        print(f"warning: ROI {name} is wider than its condyle extent", file=sys.stderr)
    return EXIT_OK


# -- extract ----------------------------------------------------------------

def _extract_one(base_dir, lm):
    if lm.label not in ("case", "control"):
        raise KneeTexError("subject is unlabeled")
    if not lm.image:
        raise KneeTexError("no image path")
    image = read_image(os.path.join(base_dir, lm.image))
    image, canon = canonical_view(image, lm)
    fv = feature_vector(image, build_layout(canon), subject_id=lm.subject_id,
                        label=1 if lm.label == "case" else 0)
    return fv


def cmd_extract(args) -> int:
    lm_path = args.landmarks or os.path.join(args.cohort, "landmarks.json")
    base_dir = os.path.dirname(os.path.abspath(lm_path))
    landmarks = load_landmarks(lm_path)

    def work(lm):
        try:
            return lm, _extract_one(base_dir, lm), None
        except (KneeTexError, OSError) as exc:
            return lm, None, str(exc)

    n_threads = resolve_threads(args.threads)
    if n_threads == 1:
        results = [work(lm) for lm in landmarks]
    else:
        with ThreadPoolExecutor(n_threads) as pool:
            results = list(pool.map(work, landmarks))
    good = [fv for _, fv, err in results if fv is not None]
    failures = [(lm.subject_id, err) for lm, _, err in results if err is not None]
    failure_path = args.failures or (
        (args.out + ".failures.csv") if args.out not in (None, "-") else "failures.csv")
    with open(failure_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "error"])
        w.writerows(failures)
    if not good:
        raise KneeTexError(f"no subject could be extracted; see {failure_path}")
    matrix = FeatureMatrix(tuple(fv.subject_id for fv in good),
                           np.array([fv.values for fv in good]),
                           np.array([fv.label for fv in good]))
    with _open_out(args.out) as fh:
        write_features_csv(fh, matrix, _header("extract", landmarks=os.path.basename(lm_path),
                                               subjects=len(good), failures=len(failures)))
    for sid, err in failures:
        print(f"warning: {sid}: {err}", file=sys.stderr)
    return EXIT_OK


# -- screen -----------------------------------------------------------------

def cmd_screen(args) -> int:
    matrix = _load_matrix(args.features)
    rows = screen_features(matrix, equal_var=args.pooled_variance)
    with _open_out(args.out) as fh:
        _write_header(fh, _header("screen", test="pooled" if args.pooled_variance else "welch",
                                  subjects=matrix.n_subjects))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "t", "df", "p", "normality_p", "normal_at_0.05"])
        for r in rows:
            t = r.test
            w.writerow([t.feature_name, repr(t.t_statistic), repr(t.degrees_of_freedom),
                        repr(t.p_value), repr(r.normality_p), str(r.normal).lower()])
    grid = table_grid(rows)
    if args.grid:
        with open(args.grid, "w") as fh:
            fh.write(grid + "\n")
    elif args.out not in (None, "-"):
        print(grid)
    return EXIT_OK


# -- search / best-per-n ----------------------------------------------------

SEARCH_COLUMNS = ["mask_hex", "n", "features", "mean_auc", "std_auc"]


def _search_row(r: SubsetResult):
    return [mask_hex(r.mask), r.cardinality, "+".join(mask_features(r.mask)),
            repr(r.mean_auc), repr(r.std_auc)]


def cmd_search(args) -> int:
    matrix = _load_matrix(args.features)
    spec = _cv_spec(args)
    with _open_out(args.out) as fh:
        _write_header(fh, _header("search", seed=spec.base_seed, folds=spec.folds,
                                  repeats=spec.repeats, C=args.svm_c,
                                  auc="per-fold" if args.per_fold else "pooled",
                                  mask_from=mask_hex(args.mask_from), mask_to=mask_hex(args.mask_to),
                                  subjects=matrix.n_subjects))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SEARCH_COLUMNS)

        def stream(part):
            for r in part:
                w.writerow(_search_row(r))
            fh.flush()

        search_all(matrix, spec, C=args.svm_c, threads=args.threads, mask_from=args.mask_from,
                   mask_to=args.mask_to, pooled=not args.per_fold, on_chunk=stream)
    return EXIT_OK


def read_search_csv(paths) -> List[SubsetResult]:
    out = []
    for path in paths:
        with open(path, newline="") as fh:
            lines = [l for l in fh if not l.startswith("#") and l.strip()]
        reader = csv.DictReader(lines)
        if reader.fieldnames != SEARCH_COLUMNS:
            raise ParseError(f"{path}: header must be {','.join(SEARCH_COLUMNS)}")
        for k, rec in enumerate(reader, start=2):
            try:
                out.append(SubsetResult(int(rec["mask_hex"], 16), float(rec["mean_auc"]),
                                        float(rec["std_auc"])))
            except (TypeError, ValueError):
                raise ParseError(f"{path}: malformed data row {k}") from None
    return out


def cmd_best_per_n(args) -> int:
    results = read_search_csv(args.search)
    best = best_per_cardinality(results)
    with _open_out(args.out) as fh:
        _write_header(fh, _header("best-per-n", inputs=",".join(os.path.basename(p)
                                                               for p in args.search)))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "mask_hex", "features", "mean_auc"])
        for r in best:
            w.writerow([r.cardinality, mask_hex(r.mask), "+".join(mask_features(r.mask)),
                        repr(r.mean_auc)])
    return EXIT_OK


# -- roc / project / pairs --------------------------------------------------

def cmd_roc(args) -> int:
    matrix = _load_matrix(args.features)
    mask = parse_mask(args.mask)
    spec = _cv_spec(args)
    scores = oof_scores(matrix, mask, spec, repeat=args.repeat, C=args.svm_c)
    curve = roc_curve(scores, matrix.labels)
    with _open_out(args.out) as fh:
        _write_header(fh, _header("roc", mask=mask_hex(mask),
                                  features="+".join(mask_features(mask)), seed=spec.base_seed,
                                  folds=spec.folds, repeat=args.repeat, C=args.svm_c,
                                  auc=repr(curve.auc)))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for x, y in curve.points:
            w.writerow([repr(x), repr(y)])
    if args.cv_report:
        mean, std = cv_auc(matrix, mask, spec, C=args.svm_c)
        with open(args.cv_report, "w", newline="") as fh:
            _write_header(fh, _header("roc --cv-report", auc="pooled"))
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mask", "features", "mean_auc", "std_auc", "repeats", "folds", "C",
                        "seed"])
            w.writerow([mask_hex(mask), "+".join(mask_features(mask)), repr(mean), repr(std),
                        spec.repeats, spec.folds, args.svm_c, spec.base_seed])
    return EXIT_OK


def cmd_project(args) -> int:
    matrix = _load_matrix(args.features)
    mask = parse_mask(args.mask)
    names = mask_features(mask)
    X = matrix.columns(mask)
    model = fit_standardized(X, signed_labels(matrix.labels), C=args.svm_c, seed=args.seed,
                             feature_names=names)
    proj = project_2d(X, model, decorrelate=args.decorrelate)
    with _open_out(args.out) as fh:
        _write_header(fh, _header("project", mask=mask_hex(mask), features="+".join(names),
                                  seed=args.seed, C=args.svm_c,
                                  hyperplane_x=repr(proj.threshold),
                                  x_direction=" ".join(format_float(v) for v in proj.direction),
                                  y_direction=" ".join(format_float(v)
                                                       for v in proj.second_direction)))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "label", "x", "y"])
        for sid, lab, x, y in zip(matrix.subject_ids, matrix.labels, proj.x, proj.y):
            w.writerow([sid, int(lab), repr(float(x)), repr(float(y))])
    if args.model_out:
        with open(args.model_out, "w") as fh:
            json.dump(model.to_dict(), fh, indent=1)
    return EXIT_OK


def cmd_pairs(args) -> int:
    matrix = _load_matrix(args.features)
    mask = parse_mask(args.mask)
    idx = mask_indices(mask)
    os.makedirs(args.out, exist_ok=True)
    written = 0
    for a, b in itertools.combinations(idx, 2):
        fa, fb = FEATURE_NAMES[a], FEATURE_NAMES[b]
        with open(os.path.join(args.out, f"pair_{fa}__{fb}.csv"), "w", newline="") as fh:
            _write_header(fh, _header("pairs", mask=mask_hex(mask), x=fa, y=fb))
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["subject_id", "label", fa, fb])
            for sid, lab, row in zip(matrix.subject_ids, matrix.labels, matrix.X):
                w.writerow([sid, int(lab), format_float(row[a]), format_float(row[b])])
        written += 1
    print(f"wrote {written} pair files to {args.out}", file=sys.stderr)
    return EXIT_OK


# -- synth / bench ----------------------------------------------------------

def _parse_effects(items) -> dict:
    effects = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--effect expects FEATURE=DELTA, got {item!r}")
        name, val = item.split("=", 1)
        try:
            effects[name.strip()] = float(val)
        except ValueError:
            raise UsageError(f"--effect {item!r}: {val!r} is not a number") from None
    return effects


def cmd_synth(args) -> int:
    spec = CohortSpec.with_effects(
        _parse_effects(args.effect), h=args.h, e=args.e, n_case=args.n_case,
        n_control=args.n_control, patch_size=args.patch_size, noise_sd=args.noise_sd,
        entropy_noise_sd=args.entropy_noise_sd, seed=args.seed)
    matrix = write_synthetic_cohort(spec, args.out, image_format=args.format)
    if args.features:
        with _open_out(args.features) as fh:
            write_features_csv(fh, matrix, _header("synth", seed=args.seed, mode="fast",
                                                   informative="+".join(spec.informative) or "none"))
    print(f"wrote {matrix.n_subjects} subjects to {args.out}", file=sys.stderr)
    return EXIT_OK


def bench_descriptors(sizes: Sequence[int], repeats: int, seed: int = 0):
    rows = []
    for size in sizes:
        patch = fbm_patch(0.5, size, seed)
        for name, fn in (("entropy", entropy), ("hurst", hurst)):
            fn(patch)
            t0 = time.perf_counter()
            for _ in range(repeats):
                fn(patch)
            rows.append((size, name, (time.perf_counter() - t0) / repeats))
    return rows


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = bench_descriptors(sizes, args.bench_repeats, args.seed)
    with _open_out(args.out) as fh:
        _write_header(fh, _header("bench", seed=args.seed, repeats=args.bench_repeats))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["size", "descriptor", "seconds_per_patch"])
        for size, name, sec in rows:
            w.writerow([size, name, f"{sec:.6g}"])
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _mask_arg(text):
    try:
        return int(text, 0) if text.lower().startswith("0x") else int(text, 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex mask: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=0, help="base seed (unsigned 64-bit)")
    shared.add_argument("--folds", type=int, default=5)
    shared.add_argument("--repeats", type=int, default=100)
    shared.add_argument("--svm-c", type=float, default=1.0, dest="svm_c")
    shared.add_argument("--threads", type=int, default=0, help="0 = one per CPU")
    shared.add_argument("--out", default="-", help="output path ('-' = stdout)")

    p = _Parser(prog="kneetex", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"kneetex {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("layout", parents=[shared], help="ROI corner CSV from landmarks")
    s.add_argument("landmarks")
    s.add_argument("--image")
    s.add_argument("--subject")
    s.add_argument("--overlay", help="write an SVG overlay to this path")
    s.add_argument("--overlay-scale", type=float, default=0.25)
    s.set_defaults(func=cmd_layout)

    s = sub.add_parser("extract", parents=[shared], help="feature CSV from a cohort directory")
    s.add_argument("cohort")
    s.add_argument("--landmarks")
    s.add_argument("--failures", help="sidecar CSV of per-subject failures")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("screen", parents=[shared], help="per-feature t-tests")
    s.add_argument("features")
    s.add_argument("--grid", help="write the text table here (otherwise printed when --out is a file)")
    s.add_argument("--pooled-variance", action="store_true")
    s.set_defaults(func=cmd_screen)

    s = sub.add_parser("search", parents=[shared], help="CV-AUC of every feature subset")
    s.add_argument("features")
    s.add_argument("--mask-from", type=_mask_arg, default=1)
    s.add_argument("--mask-to", type=_mask_arg, default=FULL_MASK)
    s.add_argument("--per-fold", action="store_true", help="average per-fold AUCs")
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("best-per-n", parents=[shared], help="best subset for each size")
    s.add_argument("search", nargs="+", help="one or more search CSVs covering all masks")
    s.set_defaults(func=cmd_best_per_n)

    s = sub.add_parser("roc", parents=[shared], help="pooled out-of-fold ROC for a subset")
    s.add_argument("features")
    s.add_argument("--mask", required=True)
    s.add_argument("--repeat", type=int, default=0, help="which CV repeat's scores to plot")
    s.add_argument("--cv-report", help="also write mean/std CV-AUC over all repeats here")
    s.set_defaults(func=cmd_roc)

    s = sub.add_parser("project", parents=[shared], help="SVM-driven 2-D projection")
    s.add_argument("features")
    s.add_argument("--mask", required=True)
    s.add_argument("--model-out")
    s.add_argument("--decorrelate", action="store_true")
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("pairs", parents=[shared], help="pairwise scatter CSVs for a subset")
    s.add_argument("features")
    s.add_argument("--mask", required=True)
    s.set_defaults(func=cmd_pairs)

    s = sub.add_parser("synth", parents=[shared], help="write a planted synthetic cohort")
    s.add_argument("--n-case", type=int, default=67)
    s.add_argument("--n-control", type=int, default=86)
    s.add_argument("--effect", action="append", metavar="FEATURE=DELTA",
                   help="case minus control shift, e.g. H_F0=-0.1 or E_T3=0.6")
    s.add_argument("--h", type=float, default=0.35)
    s.add_argument("--e", type=float, default=10.0)
    s.add_argument("--patch-size", type=int, default=70)
    s.add_argument("--noise-sd", type=float, default=0.03)
    s.add_argument("--entropy-noise-sd", type=float, default=0.3)
    s.add_argument("--format", choices=("pgm", "png"), default="pgm")
    s.add_argument("--features", help="also write the fast-mode feature CSV here")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("bench", parents=[shared], help="descriptor wall time per patch size")
    s.add_argument("--sizes", default="64,128,256,512")
    s.add_argument("--bench-repeats", type=int, default=5)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "synth" and args.out == "-":
            raise UsageError("synth needs --out DIR")
        if args.command == "pairs" and args.out == "-":
            raise UsageError("pairs needs --out DIR")
        return args.func(args)
    except (KneeTexError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"kneetex: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        print(f"kneetex: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
