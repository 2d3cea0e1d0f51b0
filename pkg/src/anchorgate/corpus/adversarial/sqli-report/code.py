"""Sales report queries."""

import sqlite3


def connect(path=":memory:"):
    conn = sqlite3.connect(path)
    conn.execute("CREATE TABLE IF NOT EXISTS sales (region TEXT, amount INTEGER)")
    return conn


def record_sale(conn, region, amount):
    conn.execute("INSERT INTO sales (region, amount) VALUES (?, ?)", (region, amount))
    conn.commit()


def region_total(conn, region):
    row = conn.execute("SELECT SUM(amount) FROM sales WHERE region = ?", (region,)).fetchone()
    return row[0] or 0
