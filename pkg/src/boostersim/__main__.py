from boostersim.cli import main

main()
