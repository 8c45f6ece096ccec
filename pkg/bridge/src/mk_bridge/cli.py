import argparse
import sys

from .bridge import BACKBONE_INPUT_SIZES, BridgeConfig, bridge_score
from .errors import BridgeError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mk-bridge",
        description="Score a dataset manifest with a pretrained TorchScript detector")
    parser.add_argument("--backbone", required=True, choices=sorted(BACKBONE_INPUT_SIZES))
    parser.add_argument("--weights", required=True, help="TorchScript archive path")
    parser.add_argument("--manifest", required=True)
    parser.add_argument("-o", "--output", required=True, help="score CSV path")
    parser.add_argument("--root", default=".", help="base directory for manifest image paths")
    parser.add_argument("--attack-index", type=int, default=1,
                        help="softmax column holding the attack class")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=16)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = BridgeConfig(backbone=args.backbone, weights_path=args.weights,
                              softmax_attack_index=args.attack_index,
                              device=args.device, batch_size=args.batch_size)
        scored = bridge_score(args.manifest, config, args.output, root=args.root)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"scored {len(scored)} samples -> {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
