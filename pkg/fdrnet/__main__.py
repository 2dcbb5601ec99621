from fdrnet.cli import main

main()
