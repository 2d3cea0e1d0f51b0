"""User administration: every destructive action requires an administrator."""


class PermissionDenied(Exception):
    pass


class Directory:
    def __init__(self):
        self.users = {}

    def add(self, name, admin=False):
        self.users[name] = {"admin": admin}


def require_admin(directory, actor):
    user = directory.users.get(actor)
    if user is None or not user["admin"]:
        raise PermissionDenied(f"{actor} may not administer users")


def _remove_user(directory, name):
    return directory.users.pop(name, None) is not None


def delete_user(directory, actor, name):
    require_admin(directory, actor)
    return _remove_user(directory, name)
