import sqlite3

uid = input()
query = "DELETE FROM sessions WHERE user_id = {}".format(uid)
sqlite3.connect("app.db").cursor().execute(query)
