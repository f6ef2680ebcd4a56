from mbrh.cli import main

main()
