import sqlite3

conn = sqlite3.connect("app.db")
cur = conn.cursor()
cur.execute("SELECT name FROM rooms ORDER BY price")
for row in cur.fetchall():
    print(row)
