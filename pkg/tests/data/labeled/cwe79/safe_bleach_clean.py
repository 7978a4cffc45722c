import bleach
from flask import render_template_string, request

bio = bleach.clean(request.form.get("bio"))
page = render_template_string("<div>" + bio + "</div>")
