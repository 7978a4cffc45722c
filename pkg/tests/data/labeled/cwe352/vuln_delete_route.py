@app.route("/account", methods=["GET", "DELETE"])
def delete_account():
    close_account()
    return "deleted"
