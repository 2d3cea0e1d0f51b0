"""API key issuance and password hashing."""

import hashlib
import hmac
import os
import secrets

KEY_BYTES = 32
ITERATIONS = 200_000


def generate_api_key(prefix="ak"):
    return f"{prefix}_{secrets.token_urlsafe(KEY_BYTES)}"


def new_salt():
    return os.urandom(16)


def hash_password(password, salt=None):
    if not password:
        raise ValueError("empty password")
    salt = salt or new_salt()
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, ITERATIONS)
    return salt.hex() + "$" + digest.hex()


def check_password(password, stored):
    salt_hex, _, digest_hex = stored.partition("$")
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), bytes.fromhex(salt_hex), ITERATIONS)
    return hmac.compare_digest(digest.hex(), digest_hex)
