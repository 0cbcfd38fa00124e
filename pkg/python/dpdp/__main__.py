from dpdp.cli import cli

cli()
