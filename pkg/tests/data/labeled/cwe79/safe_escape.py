import html

comment = input()
body = "<p>" + html.escape(comment) + "</p>"
handler.wfile.write(body)
