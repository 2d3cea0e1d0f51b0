"""Customer lookup: names are validated before they reach the database."""

import re
import sqlite3

NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]{2,31}$")


def connect(path=":memory:"):
    conn = sqlite3.connect(path)
    conn.execute("CREATE TABLE IF NOT EXISTS customers (name TEXT PRIMARY KEY, tier TEXT)")
    return conn


def validate_user_input(name):
    if not isinstance(name, str):
        raise ValueError("name must be a string")
    if not NAME_RE.match(name):
        raise ValueError(f"invalid name: {name!r}")
    return name


def add_customer(conn, name, tier="basic"):
    name = validate_user_input(name)
    conn.execute("INSERT INTO customers (name, tier) VALUES (?, ?)", (name, tier))
    conn.commit()


def get_customer(conn, name):
    name = validate_user_input(name)
    row = conn.execute("SELECT name, tier FROM customers WHERE name = ?", (name,)).fetchone()
    # missing customers map to None
    if row is None:
        return None
    return {"name": row[0], "tier": row[1]}
