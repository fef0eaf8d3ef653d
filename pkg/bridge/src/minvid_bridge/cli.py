from __future__ import annotations

import click

from .adapters import ADAPTERS
from .app import create_app


@click.group()
def main() -> None:
    """Scoring bridge for the recognition-search wire protocol."""


@main.command()
@click.option("--port", default=9000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option(
    "--adapter",
    "adapter_name",
    default="baseline",
    type=click.Choice(sorted(ADAPTERS)),
    show_default=True,
    help="Which model adapter to serve.",
)
def serve(port: int, host: str, adapter_name: str) -> None:
    """Serve /score and /score_batch."""
    import uvicorn

    adapter = ADAPTERS[adapter_name]()
    uvicorn.run(create_app(adapter), host=host, port=port)


if __name__ == "__main__":
    main()
