if __name__ == "__main__":
    from chainstab.app import main

    main()
