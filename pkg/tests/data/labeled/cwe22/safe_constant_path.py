with open("/etc/hostname") as fh:
    print(fh.read())
