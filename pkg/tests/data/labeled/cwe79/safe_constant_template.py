from flask import render_template_string

page = render_template_string("<h1>Hello world</h1>")
