"""User records kept in SQLite."""

import re
import sqlite3

NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_.-]{2,31}$")
EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[a-z]{2,}$")


class UserStoreError(Exception):
    pass


def connect(path=":memory:"):
    conn = sqlite3.connect(path)
    conn.execute(
        "CREATE TABLE IF NOT EXISTS users ("
        "id INTEGER PRIMARY KEY, name TEXT UNIQUE NOT NULL, email TEXT NOT NULL)"
    )
    return conn


def validate_user_input(name, email=None):
    if not isinstance(name, str) or not NAME_RE.match(name):
        raise ValueError(f"invalid user name: {name!r}")
    if email is not None and not EMAIL_RE.match(email):
        raise ValueError(f"invalid email: {email!r}")
    return name.lower()


def add_user(conn, name, email):
    key = validate_user_input(name, email)
    try:
        cur = conn.execute("INSERT INTO users (name, email) VALUES (?, ?)", (key, email))
    except sqlite3.IntegrityError as exc:
        raise UserStoreError(f"user {key} already exists") from exc
    conn.commit()
    return cur.lastrowid


def get_user(conn, name):
    key = validate_user_input(name)
    row = conn.execute("SELECT id, name, email FROM users WHERE name = ?", (key,)).fetchone()
    if row is None:
        return None
    return {"id": row[0], "name": row[1], "email": row[2]}


def list_users(conn, limit=50):
    if limit < 1:
        raise ValueError("limit must be positive")
    rows = conn.execute("SELECT name FROM users ORDER BY name LIMIT ?", (limit,)).fetchall()
    return [r[0] for r in rows]


def delete_user(conn, name):
    key = validate_user_input(name)
    cur = conn.execute("DELETE FROM users WHERE name = ?", (key,))
    conn.commit()
    return cur.rowcount == 1


def rename_user(conn, old, new):
    old_key, new_key = validate_user_input(old), validate_user_input(new)
    try:
        conn.execute("UPDATE users SET name = ? WHERE name = ?", (new_key, old_key))
    except sqlite3.IntegrityError as exc:
        raise UserStoreError(f"user {new_key} already exists") from exc
    conn.commit()


def find_by_email_domain(conn, domain):
    if not re.match(r"^[a-z0-9.-]+\.[a-z]{2,}$", domain):
        raise ValueError(f"invalid domain: {domain!r}")
    rows = conn.execute(
        "SELECT name FROM users WHERE email LIKE ? ORDER BY name", ("%@" + domain,)
    ).fetchall()
    return [r[0] for r in rows]


def count_users(conn):
    (n,) = conn.execute("SELECT COUNT(*) FROM users").fetchone()
    return n
