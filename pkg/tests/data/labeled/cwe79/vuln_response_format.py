from django.http import HttpResponse
from django.shortcuts import render

name = request.GET.get("name")
response = HttpResponse("Welcome back, %s" % name)
