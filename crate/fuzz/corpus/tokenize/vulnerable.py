import hashlib
import pickle
import subprocess

import yaml
from flask import Flask, request

app = Flask(__name__)
DB_PASSWORD = "hunter2"


@app.route("/run")
def run():
    cmd = request.args.get("cmd")
    return subprocess.check_output(cmd, shell=True)


def load(blob):
    return pickle.loads(blob)


def config(text):
    return yaml.load(text)


def digest(data):
    return hashlib.md5(data).hexdigest()


def query(cur, name):
    cur.execute("SELECT * FROM users WHERE name = '%s'" % name)


if __name__ == "__main__":
    app.run(debug=True)
