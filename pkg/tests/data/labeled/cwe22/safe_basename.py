import os

name = os.path.basename(input())
with open(os.path.join("/srv/uploads", name)) as fh:
    print(fh.read())
