query = input()
body = "<title>Results for " + query + "</title>"
handler.wfile.write(body)
