"""Self-supervised two-stage reconstruction network for the dual-camera setup.

The network never sees ground-truth cubes. Training minimizes a weighted sum
of two measurement-consistency losses: re-rendering the estimated cube through
the dispersive (coded gray) branch and through the filtered color branch, and
comparing against the actually captured frames by per-pixel mean squared
error. All layers and gradients are the hand-written primitives from
``nnops``; optimization is plain SGD with a stepwise-decayed learning rate.

Architecture (bands N, hidden width C):

* stage 1: N dilated taps along x undo the dispersive overhang, mapping the
  (Y, X + (N-1)*s) frame to an (N, Y, X) cube estimate.
* stage 2: two conv branches refine that estimate, one at full resolution and
  one on a 2x2 mean-pooled copy (two 3x3 layers each, ReLU, zero padding).
  The half-scale output is nearest-upsampled, added to the full-scale output,
  projected back to N bands by a final 3x3 conv, and added residually to the
  stage-1 estimate.

Spatial dimensions must be even so the pooled branch tiles exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import CompressedFrame, HsiCube, RawColorFrame, WavelengthGrid
from .forward import (
    CassiOperator,
    ColorOperator,
    _cassi_forward_raw,
    _color_weights,
    cassi_adjoint_raw,
)
from .nnops import (
    conv3x3_backward,
    conv3x3_forward,
    mean_pool2_backward,
    mean_pool2_forward,
    nearest_up2_backward,
    nearest_up2_forward,
    relu_backward,
    relu_forward,
    shifted_taps_backward,
    shifted_taps_forward,
)

CHECKPOINT_DTYPE = "<f8"


def _weight_shapes(bands: int, hidden: int) -> dict[str, tuple[int, ...]]:
    n, c = bands, hidden
    return {
        "stage1.w": (n, n),
        "stage1.b": (n,),
        "full1.w": (c, n, 3, 3),
        "full1.b": (c,),
        "full2.w": (c, c, 3, 3),
        "full2.b": (c,),
        "half1.w": (c, n, 3, 3),
        "half1.b": (c,),
        "half2.w": (c, c, 3, 3),
        "half2.b": (c,),
        "out.w": (n, c, 3, 3),
        "out.b": (n,),
    }


@dataclass(frozen=True)
class ReconNet:
    bands: int
    hidden: int
    shift_step: int
    weights: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        if self.bands < 1 or self.hidden < 1 or self.shift_step < 1:
            raise ValueError("bands, hidden and shift_step must be >= 1")
        expected = _weight_shapes(self.bands, self.hidden)
        if set(self.weights) != set(expected):
            raise ValueError("weight dictionary keys do not match the architecture")
        for key, shape in expected.items():
            arr = self.weights[key]
            if arr.shape != shape:
                raise ValueError(f"{key} has shape {arr.shape}, expected {shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{key} contains non-finite values")

    @property
    def parameter_count(self) -> int:
        """Total number of scalar weights, a pure function of (bands, hidden)."""
        return sum(v.size for v in self.weights.values())

    @classmethod
    def init(cls, bands: int, hidden: int = 16, shift_step: int = 1, seed: int = 0) -> "ReconNet":
        """Fresh network: uniform +-sqrt(1/fan_in) weights, zero biases.

        Weight tensors are drawn in the fixed key order of the architecture so
        initialization is reproducible from the seed alone.
        """
        rng = np.random.default_rng(seed)
        fan_in = {
            "stage1.w": bands,
            "full1.w": bands * 9,
            "full2.w": hidden * 9,
            "half1.w": bands * 9,
            "half2.w": hidden * 9,
            "out.w": hidden * 9,
        }
        weights = {}
        for key, shape in _weight_shapes(bands, hidden).items():
            if key.endswith(".b"):
                weights[key] = np.zeros(shape)
            else:
                lim = np.sqrt(1.0 / fan_in[key])
                weights[key] = rng.uniform(-lim, lim, size=shape)
        return cls(bands=bands, hidden=hidden, shift_step=shift_step, weights=weights)


def _check_net_frame(net: ReconNet, frame: np.ndarray) -> tuple[int, int]:
    height, fwidth = frame.shape
    width = fwidth - (net.bands - 1) * net.shift_step
    if width < 1:
        raise ValueError("frame too narrow for the configured band count")
    if height % 2 or width % 2:
        raise ValueError("scene dimensions must be even for the pooled branch")
    return height, width


def _forward_cached(net: ReconNet, frame: np.ndarray) -> tuple[np.ndarray, dict]:
    _, width = _check_net_frame(net, frame)
    w = net.weights
    # The frame sums ~bands masked copies; a fixed 1/bands input scale keeps
    # stage-1 activations and gradients on the same footing as the conv stack.
    frame = frame / net.bands
    z0 = shifted_taps_forward(frame, w["stage1.w"], w["stage1.b"], width, net.shift_step)
    a1_pre = conv3x3_forward(z0, w["full1.w"], w["full1.b"])
    a1 = relu_forward(a1_pre)
    a2_pre = conv3x3_forward(a1, w["full2.w"], w["full2.b"])
    a2 = relu_forward(a2_pre)
    pooled = mean_pool2_forward(z0)
    b1_pre = conv3x3_forward(pooled, w["half1.w"], w["half1.b"])
    b1 = relu_forward(b1_pre)
    b2_pre = conv3x3_forward(b1, w["half2.w"], w["half2.b"])
    b2 = relu_forward(b2_pre)
    fused = a2 + nearest_up2_forward(b2)
    out = conv3x3_forward(fused, w["out.w"], w["out.b"]) + z0
    cache = {
        "frame": frame,
        "width": width,
        "z0": z0,
        "a1_pre": a1_pre,
        "a1": a1,
        "a2_pre": a2_pre,
        "pooled": pooled,
        "b1_pre": b1_pre,
        "b1": b1,
        "b2_pre": b2_pre,
        "fused": fused,
    }
    return out, cache


def net_forward(
    net: ReconNet, frame: CompressedFrame, grid: WavelengthGrid | None = None
) -> HsiCube:
    """Raw (unclipped) cube estimate for a coded frame."""
    out, _ = _forward_cached(net, frame.values)
    if grid is None:
        grid = WavelengthGrid.default(net.bands)
    return HsiCube(grid=grid, data=out)


def net_backward(net: ReconNet, cache: dict, grad_out: np.ndarray) -> dict[str, np.ndarray]:
    """Gradient of a scalar loss w.r.t. every weight, given d(loss)/d(output)."""
    w = net.weights
    grads = {}
    d_fused, grads["out.w"], grads["out.b"] = conv3x3_backward(
        cache["fused"], w["out.w"], grad_out
    )
    d_z0 = grad_out.copy()

    d_a2 = relu_backward(cache["a2_pre"], d_fused)
    d_a1, grads["full2.w"], grads["full2.b"] = conv3x3_backward(cache["a1"], w["full2.w"], d_a2)
    d_a1 = relu_backward(cache["a1_pre"], d_a1)
    d_z0_full, grads["full1.w"], grads["full1.b"] = conv3x3_backward(
        cache["z0"], w["full1.w"], d_a1
    )
    d_z0 += d_z0_full

    d_b2 = relu_backward(cache["b2_pre"], nearest_up2_backward(d_fused))
    d_b1, grads["half2.w"], grads["half2.b"] = conv3x3_backward(cache["b1"], w["half2.w"], d_b2)
    d_b1 = relu_backward(cache["b1_pre"], d_b1)
    d_pooled, grads["half1.w"], grads["half1.b"] = conv3x3_backward(
        cache["pooled"], w["half1.w"], d_b1
    )
    d_z0 += mean_pool2_backward(d_pooled)

    _, grads["stage1.w"], grads["stage1.b"] = shifted_taps_backward(
        cache["frame"], w["stage1.w"], d_z0, cache["width"], net.shift_step
    )
    return grads


@dataclass(frozen=True)
class DualLoss:
    total: float
    loss_gray: float
    loss_color: float


def _loss_and_grad(
    cube_data: np.ndarray,
    gray: np.ndarray,
    color: np.ndarray,
    mask: np.ndarray,
    shift_step: int,
    color_weights: np.ndarray,
    op: CassiOperator,
    weight_gray: float,
    weight_color: float,
) -> tuple[DualLoss, np.ndarray]:
    resid_gray = _cassi_forward_raw(cube_data, mask, shift_step) - gray
    resid_color = np.einsum("byx,byx->yx", color_weights, cube_data) - color
    loss_gray = float(np.mean(resid_gray**2))
    loss_color = float(np.mean(resid_color**2))
    total = weight_gray * loss_gray + weight_color * loss_color
    grad = weight_gray * (2.0 / resid_gray.size) * cassi_adjoint_raw(resid_gray, op)
    grad += weight_color * (2.0 / resid_color.size) * (resid_color[None] * color_weights)
    return DualLoss(total=total, loss_gray=loss_gray, loss_color=loss_color), grad


def dual_loss(
    cube: HsiCube,
    gray_frame: CompressedFrame,
    color_frame: RawColorFrame,
    cassi_op: CassiOperator,
    color_op: ColorOperator,
    weight_gray: float = 1.0,
    weight_color: float = 1.0,
) -> DualLoss:
    """Weighted sum of the two per-pixel MSE measurement-consistency terms."""
    bands, height, width = cube.data.shape
    if bands != cassi_op.bands:
        raise ValueError("cube band count does not match the dispersive operator")
    weights = _color_weights(color_op, height, width)
    loss, _ = _loss_and_grad(
        cube.data,
        gray_frame.values,
        color_frame.values,
        cassi_op.mask.values,
        cassi_op.shift_step,
        weights,
        cassi_op,
        weight_gray,
        weight_color,
    )
    return loss


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1200
    lr: float = 1e-3
    lr_decay_factor: float = 0.2
    lr_decay_every: int = 300
    weight_gray: float = 1.0
    weight_color: float = 1.0
    batch_size: int = 0
    hidden: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.lr >= 0:
            raise ValueError("lr must be >= 0")
        if not 0 < self.lr_decay_factor <= 1:
            raise ValueError("lr_decay_factor must be in (0, 1]")
        if self.lr_decay_every < 1:
            raise ValueError("lr_decay_every must be >= 1")
        if self.weight_gray < 0 or self.weight_color < 0:
            raise ValueError("loss weights must be >= 0")
        if self.batch_size < 0:
            raise ValueError("batch_size must be >= 0 (0 means full batch)")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")


@dataclass(frozen=True)
class TrainReport:
    epochs_run: int
    trace: np.ndarray  # columns: epoch, lr, total, loss_gray, loss_color

    def export_csv(self, path) -> None:
        lines = ["epoch,loss_gray,loss_color,total"]
        for row in self.trace:
            lines.append(
                f"{int(row[0])},{float(row[3])!r},{float(row[4])!r},{float(row[2])!r}"
            )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _pair_arrays(
    pairs: list[tuple[CompressedFrame, RawColorFrame]],
    cassi_op: CassiOperator,
    color_op: ColorOperator,
) -> list[tuple[np.ndarray, np.ndarray]]:
    if not pairs:
        raise ValueError("need at least one measurement pair")
    out = []
    for gray, color in pairs:
        if (gray.height, gray.width) != (cassi_op.frame_height, cassi_op.frame_width):
            raise ValueError("coded frame shape does not match the dispersive operator")
        if (color.height, color.width) != (cassi_op.mask.height, cassi_op.mask.width):
            raise ValueError("color frame shape does not match the scene extent")
        out.append((gray.values, color.values))
    return out


def _pair_loss_and_grads(
    net: ReconNet,
    gray: np.ndarray,
    color: np.ndarray,
    cassi_op: CassiOperator,
    color_weights: np.ndarray,
    weight_gray: float,
    weight_color: float,
) -> tuple[DualLoss, dict[str, np.ndarray]]:
    cube, cache = _forward_cached(net, gray)
    loss, d_cube = _loss_and_grad(
        cube,
        gray,
        color,
        cassi_op.mask.values,
        cassi_op.shift_step,
        color_weights,
        cassi_op,
        weight_gray,
        weight_color,
    )
    return loss, net_backward(net, cache, d_cube)


def evaluate_pairs(
    net: ReconNet,
    pairs: list[tuple[CompressedFrame, RawColorFrame]],
    cassi_op: CassiOperator,
    color_op: ColorOperator,
    weight_gray: float = 1.0,
    weight_color: float = 1.0,
) -> DualLoss:
    """Mean dual loss of the net's reconstructions over measurement pairs."""
    arrays = _pair_arrays(pairs, cassi_op, color_op)
    weights = _color_weights(color_op, cassi_op.mask.height, cassi_op.mask.width)
    totals = np.zeros(3)
    for gray, color in arrays:
        cube, _ = _forward_cached(net, gray)
        loss, _ = _loss_and_grad(
            cube, gray, color, cassi_op.mask.values, cassi_op.shift_step,
            weights, cassi_op, weight_gray, weight_color,
        )
        totals += (loss.total, loss.loss_gray, loss.loss_color)
    totals /= len(arrays)
    return DualLoss(
        total=float(totals[0]), loss_gray=float(totals[1]), loss_color=float(totals[2])
    )


def train_selfsup(
    pairs: list[tuple[CompressedFrame, RawColorFrame]],
    cassi_op: CassiOperator,
    color_op: ColorOperator,
    config: TrainConfig = TrainConfig(),
    net: ReconNet | None = None,
) -> tuple[ReconNet, TrainReport]:
    """Train (or fine-tune) a network on measurement pairs alone.

    One epoch is one pass over the pairs: a single averaged-gradient step when
    batch_size is 0, otherwise SGD steps over shuffled minibatches. The trace
    row for an epoch is evaluated with the end-of-epoch weights, so running
    the returned net on the training pairs reproduces the last row exactly.
    Returns a new network; the input network is never modified.
    """
    arrays = _pair_arrays(pairs, cassi_op, color_op)
    if net is None:
        net = ReconNet.init(
            bands=cassi_op.bands,
            hidden=config.hidden,
            shift_step=cassi_op.shift_step,
            seed=config.seed,
        )
    elif net.bands != cassi_op.bands or net.shift_step != cassi_op.shift_step:
        raise ValueError("network geometry does not match the dispersive operator")
    weights = dict(net.weights)
    color_w = _color_weights(color_op, cassi_op.mask.height, cassi_op.mask.width)
    shuffle_rng = np.random.default_rng(config.seed + 1)

    def batches(order):
        if config.batch_size == 0:
            yield order
            return
        for i in range(0, len(order), config.batch_size):
            yield order[i : i + config.batch_size]

    trace = np.zeros((config.epochs, 5))
    current = net
    for epoch in range(config.epochs):
        lr = config.lr * config.lr_decay_factor ** (epoch // config.lr_decay_every)
        order = list(range(len(arrays)))
        if config.batch_size:
            shuffle_rng.shuffle(order)
        for batch in batches(order):
            summed: dict[str, np.ndarray] = {}
            for idx in batch:
                gray, color = arrays[idx]
                _, grads = _pair_loss_and_grads(
                    current, gray, color, cassi_op, color_w,
                    config.weight_gray, config.weight_color,
                )
                for key, val in grads.items():
                    if key in summed:
                        summed[key] += val
                    else:
                        summed[key] = val
            weights = {k: weights[k] - (lr / len(batch)) * summed[k] for k in weights}
            current = ReconNet(
                bands=net.bands, hidden=net.hidden,
                shift_step=net.shift_step, weights=weights,
            )
        loss = evaluate_pairs(
            current, pairs, cassi_op, color_op, config.weight_gray, config.weight_color
        )
        trace[epoch] = (epoch, lr, loss.total, loss.loss_gray, loss.loss_color)
    return current, TrainReport(epochs_run=config.epochs, trace=trace)


def reconstruct_selfsup(
    frame: CompressedFrame, net: ReconNet, grid: WavelengthGrid | None = None
) -> HsiCube:
    """Single forward pass; needs no color measurement at inference time.

    The output is the raw network estimate, so the dual loss of a
    reconstruction of a training frame reproduces the final trace entry
    exactly. Clamp to [0, 1] downstream when a physical cube is required.
    """
    return net_forward(net, frame, grid)


def save_checkpoint(net: ReconNet, path, train: TrainConfig | None = None) -> None:
    """Write a JSON manifest at ``path`` and the packed weights at ``path + '.bin'``.

    The manifest records the architecture and, when given, the training
    config that produced the weights (informational on load).
    """
    path = str(path)
    keys = list(_weight_shapes(net.bands, net.hidden))
    manifest = {
        "kind": "reconnet",
        "bands": net.bands,
        "hidden": net.hidden,
        "shift_step": net.shift_step,
        "seed": train.seed if train is not None else None,
        "train_config": asdict(train) if train is not None else None,
        "dtype": CHECKPOINT_DTYPE,
        "tensors": [{"name": k, "shape": list(net.weights[k].shape)} for k in keys],
    }
    payload = np.concatenate([net.weights[k].ravel() for k in keys])
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    payload.astype(CHECKPOINT_DTYPE).tofile(path + ".bin")


def load_checkpoint(path) -> ReconNet:
    path = str(path)
    with open(path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed checkpoint manifest: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("kind") != "reconnet":
        raise ValueError("not a reconnet checkpoint manifest")
    for key in ("bands", "hidden", "shift_step", "dtype", "tensors"):
        if key not in manifest:
            raise ValueError(f"checkpoint manifest missing field {key!r}")
    if manifest["dtype"] != CHECKPOINT_DTYPE:
        raise ValueError(f"unsupported checkpoint dtype {manifest['dtype']!r}")
    bands, hidden = int(manifest["bands"]), int(manifest["hidden"])
    expected = _weight_shapes(bands, hidden)
    names = [t["name"] for t in manifest["tensors"]]
    if names != list(expected):
        raise ValueError("checkpoint tensor list does not match the architecture")
    flat = np.fromfile(path + ".bin", dtype=CHECKPOINT_DTYPE).astype(np.float64)
    total = sum(int(np.prod(expected[k])) for k in expected)
    if flat.size != total:
        raise ValueError(f"checkpoint payload has {flat.size} values, expected {total}")
    weights = {}
    offset = 0
    for tensor in manifest["tensors"]:
        shape = tuple(tensor["shape"])
        if shape != expected[tensor["name"]]:
            raise ValueError(f"checkpoint tensor {tensor['name']!r} has wrong shape")
        count = int(np.prod(shape))
        weights[tensor["name"]] = flat[offset : offset + count].reshape(shape)
        offset += count
    return ReconNet(
        bands=bands, hidden=hidden, shift_step=int(manifest["shift_step"]), weights=weights
    )
