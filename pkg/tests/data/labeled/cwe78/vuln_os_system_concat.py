import os

host = input()
os.system("ping -c 1 " + host)
