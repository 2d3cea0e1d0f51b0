"""Comment intake: validated text stored through bound parameters."""

import html
import re
import sqlite3

MAX_LENGTH = 2000
AUTHOR_RE = re.compile(r"^[\w.-]{1,40}$")


def open_board(path=":memory:"):
    conn = sqlite3.connect(path)
    conn.execute("CREATE TABLE IF NOT EXISTS comments (id INTEGER PRIMARY KEY, author TEXT, body TEXT)")
    return conn


def validate_author(author):
    if not isinstance(author, str) or not AUTHOR_RE.match(author):
        raise ValueError(f"invalid author: {author!r}")
    return author


def sanitize_body(body):
    if not isinstance(body, str):
        raise ValueError("comment body must be text")
    body = body.strip()
    if not body or len(body) > MAX_LENGTH:
        raise ValueError("comment body must be 1..2000 characters")
    return html.escape(body)


def post_comment(conn, author, body):
    author = validate_author(author)
    clean = sanitize_body(body)
    cur = conn.execute("INSERT INTO comments (author, body) VALUES (?, ?)", (author, clean))
    conn.commit()
    return cur.lastrowid


def comments_by(conn, author):
    author = validate_author(author)
    rows = conn.execute("SELECT body FROM comments WHERE author = ? ORDER BY id", (author,)).fetchall()
    return [r[0] for r in rows]


def parse_page(value, default=1):
    try:
        page = int(value)
    except (TypeError, ValueError):
        return default
    return page if page >= 1 else default
