"""cfadapter command line: train-vae | train-gan | serve."""

from __future__ import annotations

import argparse
import sys

from .models import GanSpec, VaeSpec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cfadapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("train-vae", help="train a conditional VAE on a CFDS1 file")
    v.add_argument("--dataset", required=True)
    v.add_argument("--steps", type=int, default=2500)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--latent", type=int, default=16)
    v.add_argument("--beta", type=float, default=1.0)
    v.add_argument("--likelihood", choices=["bernoulli", "normal"],
                   default="bernoulli")
    v.add_argument("--variance", type=float, default=0.1)
    v.add_argument("--width", type=int, default=32)
    v.add_argument("--batch-size", type=int, default=128)
    v.add_argument("--out", required=True)

    g = sub.add_parser("train-gan", help="train a constrained conditional GAN")
    g.add_argument("--dataset", required=True)
    g.add_argument("--steps", type=int, default=1500)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--width", type=int, default=32)
    g.add_argument("--composition-weight", type=float, default=10.0)
    g.add_argument("--batch-size", type=int, default=128)
    g.add_argument("--out", required=True)

    s = sub.add_parser("serve", help="serve an artifact over the wire protocol")
    s.add_argument("artifact")
    s.add_argument("--transport", default="stdio", help="stdio or tcp:<port>")

    args = parser.parse_args(argv)
    try:
        if args.command == "train-vae":
            from .train import train_vae
            spec = VaeSpec(latent=args.latent, beta=args.beta,
                           likelihood=args.likelihood, variance=args.variance,
                           width=args.width)
            result = train_vae(args.dataset, spec, args.steps, args.seed,
                               args.out, batch_size=args.batch_size)
            print(f"wrote {args.out} (smoothed ELBO {result['elbo_start']:.1f} "
                  f"-> {result['elbo_end']:.1f})")
        elif args.command == "train-gan":
            from .train import train_gan
            spec = GanSpec(width=args.width,
                           composition_weight=args.composition_weight)
            train_gan(args.dataset, spec, args.steps, args.seed, args.out,
                      batch_size=args.batch_size)
            print(f"wrote {args.out}")
        else:
            from .serve import serve, tcp_serve
            if args.transport == "stdio":
                serve(args.artifact)
            elif args.transport.startswith("tcp:"):
                tcp_serve(args.artifact, int(args.transport.split(":", 1)[1]))
            else:
                print(f"unknown transport {args.transport!r}", file=sys.stderr)
                return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
