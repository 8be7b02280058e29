import typer

from . import evaluate, export, iterate, synthesize, textgrid, validate

app = typer.Typer(help="Self-taught action deliberation: synthesize, evaluate and iterate.")

# Deliberation loop
app.command("synthesize")(synthesize.synthesize)
app.command("iterate")(iterate.iterate)

# Datasets and evaluation
app.command("evaluate")(evaluate.evaluate)
app.command("validate")(validate.validate)
app.command("export")(export.export)

# Environment tooling
app.add_typer(textgrid.app, name="textgrid")


def main():
    """Main CLI entry point."""
    app()


if __name__ == "__main__":
    main()
